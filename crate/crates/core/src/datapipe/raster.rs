use super::DataError;

/// Label value for pixels excluded from loss and metrics.
pub const IGNORE: u8 = 255;

/// One single-band scene with georeferencing metadata and a nodata mask.
#[derive(Debug, Clone, PartialEq)]
pub struct BandRaster {
    pub width: usize,
    pub height: usize,
    pub gsd_m: f64,
    pub values: Vec<f32>,
    pub nodata: Vec<bool>,
    pub scene_id: String,
    pub dataset_id: String,
    /// (lat, lon) in degrees.
    pub centroid: (f64, f64),
}

impl BandRaster {
    pub fn new(
        width: usize,
        height: usize,
        gsd_m: f64,
        values: Vec<f32>,
        nodata: Option<Vec<bool>>,
        scene_id: impl Into<String>,
        dataset_id: impl Into<String>,
        centroid: (f64, f64),
    ) -> Result<Self, DataError> {
        let nodata = nodata.unwrap_or_else(|| vec![false; values.len()]);
        let r = Self { width, height, gsd_m, values, nodata, scene_id: scene_id.into(), dataset_id: dataset_id.into(), centroid };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<(), DataError> {
        let n = self.width * self.height;
        if self.width == 0 || self.height == 0 {
            return Err(DataError::Invalid(format!("raster {} has zero size", self.scene_id)));
        }
        if !(self.gsd_m > 0.0 && self.gsd_m.is_finite()) {
            return Err(DataError::Invalid(format!("raster {}: gsd_m must be > 0, got {}", self.scene_id, self.gsd_m)));
        }
        if self.values.len() != n || self.nodata.len() != n {
            return Err(DataError::Invalid(format!(
                "raster {}: {}x{} needs {n} values and mask entries, got {} and {}",
                self.scene_id,
                self.width,
                self.height,
                self.values.len(),
                self.nodata.len()
            )));
        }
        Ok(())
    }

    pub fn valid_count(&self) -> usize {
        self.nodata.iter().filter(|&&m| !m).count()
    }
}

/// Per-pixel labels: 0 clear, 1 cloud, [`IGNORE`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelGrid {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl LabelGrid {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self, DataError> {
        if data.len() != width * height {
            return Err(DataError::Invalid(format!("label grid {width}x{height} needs {} values, got {}", width * height, data.len())));
        }
        if let Some(v) = data.iter().find(|&&v| v > 1 && v != IGNORE) {
            return Err(DataError::Invalid(format!("label value {v} not in {{0, 1, 255}}")));
        }
        Ok(Self { width, height, data })
    }
}
