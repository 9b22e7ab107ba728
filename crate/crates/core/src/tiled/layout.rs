use serde::{Deserialize, Serialize};

use super::TiledError;
use crate::model::{receptive_field_radius, ModelSpec};

pub const TILE_SIZE: usize = 512;
pub const CORE_SIZE: usize = 256;
/// Tile buffers plus activations.
pub const DEFAULT_BUDGET_BYTES: usize = 512 << 20;

/// Output region owned by one tile; edge cores are clipped to the image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Core {
    pub row: usize,
    pub col: usize,
    pub height: usize,
    pub width: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TileLayout {
    pub width: usize,
    pub height: usize,
    pub tile_size: usize,
    pub core_size: usize,
    pub halo: usize,
    /// Row-major over the core grid.
    pub cores: Vec<Core>,
}

impl TileLayout {
    pub fn n_tiles(&self) -> usize {
        self.cores.len()
    }

    /// Core grid dimensions (columns, rows).
    pub fn grid(&self) -> (usize, usize) {
        (self.width.div_ceil(self.core_size), self.height.div_ceil(self.core_size))
    }

    /// Top-left corner of the tile read for `core`, possibly outside the image.
    pub fn tile_origin(&self, core: &Core) -> (isize, isize) {
        (core.row as isize - self.halo as isize, core.col as isize - self.halo as isize)
    }

    /// Tiling is exact only if no output pixel can see past its tile.
    pub fn check_receptive_field(&self, spec: &ModelSpec) -> Result<(), TiledError> {
        let radius = receptive_field_radius(spec);
        if self.halo < radius {
            return Err(TiledError::HaloTooSmall { halo: self.halo, radius });
        }
        Ok(())
    }
}

/// Cores on a `core`-pixel grid from (0, 0), each read with a centred
/// `tile`-pixel window.
pub fn plan_tiles(width: usize, height: usize, tile: usize, core: usize) -> Result<TileLayout, TiledError> {
    if width == 0 || height == 0 {
        return Err(TiledError::InvalidLayout(format!("image is {width}x{height}")));
    }
    if core == 0 || tile < core || (tile - core) % 2 != 0 {
        return Err(TiledError::InvalidLayout(format!("tile {tile} must exceed core {core} by an even margin")));
    }
    let mut cores = Vec::with_capacity(width.div_ceil(core) * height.div_ceil(core));
    for row in (0..height).step_by(core) {
        for col in (0..width).step_by(core) {
            cores.push(Core { row, col, height: core.min(height - row), width: core.min(width - col) });
        }
    }
    Ok(TileLayout { width, height, tile_size: tile, core_size: core, halo: (tile - core) / 2, cores })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scene_dims() {
        let l = plan_tiles(2691, 1762, TILE_SIZE, CORE_SIZE).unwrap();
        assert_eq!(l.grid(), (11, 7));
        assert_eq!(l.n_tiles(), 77);
        assert_eq!(l.halo, 128);
        let last = l.cores.last().unwrap();
        assert_eq!((last.row, last.col, last.height, last.width), (1536, 2560, 226, 131));
    }

    #[test]
    fn small_images() {
        assert_eq!(plan_tiles(256, 256, 512, 256).unwrap().n_tiles(), 1);
        assert_eq!(plan_tiles(512, 512, 512, 256).unwrap().n_tiles(), 4);
        assert_eq!(plan_tiles(1, 1, 512, 256).unwrap().cores[0], Core { row: 0, col: 0, height: 1, width: 1 });
        assert!(plan_tiles(0, 5, 512, 256).is_err());
        assert!(plan_tiles(5, 5, 511, 256).is_err());
    }

    #[test]
    fn default_model_fits_halo() {
        let l = plan_tiles(100, 100, TILE_SIZE, CORE_SIZE).unwrap();
        l.check_receptive_field(&ModelSpec::default()).unwrap();
        let tight = plan_tiles(100, 100, 256 + 2 * 40, 256).unwrap();
        assert!(matches!(tight.check_receptive_field(&ModelSpec::default()), Err(TiledError::HaloTooSmall { .. })));
    }
}
