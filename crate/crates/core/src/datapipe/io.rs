//! Band container and PGM readers/writers.

use std::fs;
use std::io::Cursor;
use std::path::Path;

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{DynamicImage, ExtendedColorType, ImageEncoder, ImageFormat};
use serde::{Deserialize, Serialize};

use super::{BandRaster, DataError, LabelGrid, IGNORE};

const BAND_MAGIC: &[u8; 8] = b"TSEGBAND";
const DEFAULT_NODATA: f32 = -9999.0;

#[derive(Debug, Serialize, Deserialize)]
struct BandHeader {
    width: usize,
    height: usize,
    gsd_m: f64,
    scene_id: String,
    dataset_id: String,
    centroid: [f64; 2],
    nodata_value: f32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    provenance: Option<serde_json::Value>,
}

/// Serializes a raster; nodata pixels are written as the sentinel `-9999`.
pub fn write_band(path: &Path, raster: &BandRaster, provenance: Option<serde_json::Value>) -> Result<(), DataError> {
    raster.validate()?;
    let header = BandHeader {
        width: raster.width,
        height: raster.height,
        gsd_m: raster.gsd_m,
        scene_id: raster.scene_id.clone(),
        dataset_id: raster.dataset_id.clone(),
        centroid: [raster.centroid.0, raster.centroid.1],
        nodata_value: DEFAULT_NODATA,
        provenance,
    };
    let json = serde_json::to_vec(&header).map_err(|e| DataError::format(path, e.to_string()))?;
    let mut out = Vec::with_capacity(12 + json.len() + raster.values.len() * 4);
    out.extend_from_slice(BAND_MAGIC);
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    for (&v, &nd) in raster.values.iter().zip(&raster.nodata) {
        if !nd && v == DEFAULT_NODATA {
            return Err(DataError::format(path, "valid pixel collides with the nodata sentinel"));
        }
        out.extend_from_slice(&(if nd { DEFAULT_NODATA } else { v }).to_le_bytes());
    }
    fs::write(path, out).map_err(|e| DataError::io(path, e))
}

pub fn read_band(path: &Path) -> Result<BandRaster, DataError> {
    let bytes = fs::read(path).map_err(|e| DataError::io(path, e))?;
    if bytes.len() < 12 || &bytes[..8] != BAND_MAGIC {
        return Err(DataError::format(path, "bad magic, not a band container"));
    }
    let len = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
    let json = bytes.get(12..12 + len).ok_or_else(|| DataError::format(path, "header length exceeds file size"))?;
    let h: BandHeader = serde_json::from_slice(json).map_err(|e| DataError::format(path, format!("bad header: {e}")))?;
    let payload = &bytes[12 + len..];
    let n = h.width * h.height;
    if payload.len() != n * 4 {
        return Err(DataError::format(path, format!("payload has {} bytes, {}x{} needs {}", payload.len(), h.width, h.height, n * 4)));
    }
    let mut values = Vec::with_capacity(n);
    let mut nodata = Vec::with_capacity(n);
    for c in payload.chunks_exact(4) {
        let v = f32::from_le_bytes(c.try_into().expect("4 bytes"));
        let nd = v == h.nodata_value || v.is_nan();
        nodata.push(nd);
        values.push(if nd { 0.0 } else { v });
    }
    BandRaster::new(h.width, h.height, h.gsd_m, values, Some(nodata), h.scene_id, h.dataset_id, (h.centroid[0], h.centroid[1]))
}

fn decode_pgm(path: &Path) -> Result<DynamicImage, DataError> {
    let bytes = fs::read(path).map_err(|e| DataError::io(path, e))?;
    if !bytes.starts_with(b"P5") {
        return Err(DataError::format(path, "not a binary PGM (P5)"));
    }
    image::load(Cursor::new(bytes), ImageFormat::Pnm).map_err(|e| DataError::format(path, e.to_string()))
}

/// Reads an 8-bit label PGM: 0 clear, 255 cloud, 128 ignore.
pub fn read_label_pgm(path: &Path) -> Result<LabelGrid, DataError> {
    let DynamicImage::ImageLuma8(img) = decode_pgm(path)? else {
        return Err(DataError::format(path, "label PGM must be 8-bit"));
    };
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data = img
        .into_raw()
        .into_iter()
        .map(|v| match v {
            0 => Ok(0),
            255 => Ok(1),
            128 => Ok(IGNORE),
            other => Err(DataError::format(path, format!("label value {other} not in {{0, 128, 255}}"))),
        })
        .collect::<Result<Vec<u8>, _>>()?;
    LabelGrid::new(w, h, data)
}

fn write_gray8(path: &Path, width: usize, height: usize, data: Vec<u8>) -> Result<(), DataError> {
    let img = image::GrayImage::from_raw(width as u32, height as u32, data)
        .ok_or_else(|| DataError::format(path, "pixel buffer does not match dimensions"))?;
    let mut buf = Vec::new();
    PnmEncoder::new(&mut buf)
        .with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary))
        .write_image(img.as_raw(), img.width(), img.height(), ExtendedColorType::L8)
        .map_err(|e| DataError::format(path, e.to_string()))?;
    fs::write(path, buf).map_err(|e| DataError::io(path, e))
}

pub fn write_label_pgm(path: &Path, labels: &LabelGrid) -> Result<(), DataError> {
    let data = labels
        .data
        .iter()
        .map(|&v| match v {
            0 => 0,
            1 => 255,
            _ => 128,
        })
        .collect();
    write_gray8(path, labels.width, labels.height, data)
}

/// Binary mask PGM: 0 clear, 255 cloud.
pub fn write_mask_pgm(path: &Path, width: usize, height: usize, cloud: &[bool]) -> Result<(), DataError> {
    write_gray8(path, width, height, cloud.iter().map(|&c| if c { 255 } else { 0 }).collect())
}

/// Reads 16-bit PGM imagery as `dn * scale + offset`. Pixels equal to
/// `nodata_dn` are flagged as nodata.
pub fn read_pgm16(
    path: &Path,
    scale: f64,
    offset: f64,
    nodata_dn: Option<u16>,
) -> Result<(usize, usize, Vec<f32>, Vec<bool>), DataError> {
    let img = match decode_pgm(path)? {
        DynamicImage::ImageLuma16(img) => img,
        DynamicImage::ImageLuma8(img) => DynamicImage::ImageLuma8(img).into_luma16(),
        _ => return Err(DataError::format(path, "imagery PGM must be single-channel")),
    };
    let (w, h) = (img.width() as usize, img.height() as usize);
    let raw = img.into_raw();
    let nodata: Vec<bool> = raw.iter().map(|&d| Some(d) == nodata_dn).collect();
    let values = raw.iter().zip(&nodata).map(|(&d, &nd)| if nd { 0.0 } else { (d as f64 * scale + offset) as f32 }).collect();
    Ok((w, h, values, nodata))
}
