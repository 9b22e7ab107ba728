use super::ModelSpec;

/// Upper bound on the distance (in input pixels, per axis) from an output
/// pixel to any input pixel that can influence it.
///
/// Interval propagation: a k×k conv adds `(k-1)/2 · jump`, a stride multiplies
/// the jump, a ×2 bilinear upsample reaches one coarse pixel either side and
/// a concat takes the larger radius of its inputs.
pub fn receptive_field_radius(spec: &ModelSpec) -> usize {
    let mut r = 0usize;
    let mut jump = 1usize;
    // (radius, jump) at each encoder stage output; index 0 is the raw input
    let mut levels = vec![(0usize, 1usize)];
    for st in &spec.encoder {
        for b in 0..st.blocks {
            let stride = if b == 0 { st.stride } else { 1 };
            r += jump; // depthwise 3x3; the 1x1 adds nothing
            jump *= stride;
        }
        levels.push((r, jump));
    }
    levels.pop();
    for _ in &spec.decoder {
        let (skip_r, skip_jump) = levels.pop().expect("one skip per decoder stage");
        if skip_jump != jump {
            r += jump;
        }
        jump = skip_jump;
        r = r.max(skip_r);
        r += 2 * jump; // two 3x3 convs
    }
    r
}
