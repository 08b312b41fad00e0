//! File I/O: 8-bit raster frames and masks, Middlebury `.flo` flow files.
//!
//! Frames are normalized to `[0, 1]` on load (divide by 255) and quantized
//! half-up on save; all in-memory math stays continuous. Masks binarize at
//! 0.5. Directory loading is lexicographic on file name.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};
use crate::raster::{FlowField, Frame, Mask, Sequence};

/// Magic tag of a Middlebury `.flo` file: the float 202021.25 ("PIEH").
pub const FLO_MAGIC: f32 = 202021.25;

const RASTER_EXTENSIONS: &[&str] = &["png", "jpg", "jpeg", "bmp", "tif", "tiff", "pgm", "ppm"];

fn list_raster_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.extension()
                    .and_then(|e| e.to_str())
                    .map(|e| RASTER_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
                    .unwrap_or(false)
        })
        .collect();
    files.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    Ok(files)
}

/// Loads one frame image, normalizing 8-bit samples to `[0, 1]`.
pub fn load_frame(path: &Path) -> Result<Frame> {
    let img = image::open(path)
        .map_err(|e| Error::UnreadableFile {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?
        .to_rgb8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data = img.as_raw().iter().map(|&v| v as f32 / 255.0).collect();
    Frame::from_data(w, h, data)
}

/// Loads one single-channel mask image, binarizing at 0.5.
pub fn load_mask(path: &Path) -> Result<Mask> {
    let img = image::open(path)
        .map_err(|e| Error::UnreadableFile {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?
        .to_luma8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    // v/255 > 0.5  <=>  v >= 128
    let data = img.as_raw().iter().map(|&v| u8::from(v >= 128)).collect();
    Mask::from_data(w, h, data)
}

/// Loads equal counts of lexicographically ordered frames and masks.
pub fn load_sequence(frame_dir: &Path, mask_dir: &Path) -> Result<Sequence> {
    let frame_files = list_raster_files(frame_dir)?;
    let mask_files = list_raster_files(mask_dir)?;
    if frame_files.len() != mask_files.len() {
        return Err(Error::CountMismatch {
            frames: frame_files.len(),
            masks: mask_files.len(),
        });
    }
    let frames = frame_files
        .iter()
        .map(|p| load_frame(p))
        .collect::<Result<Vec<_>>>()?;
    let masks = mask_files
        .iter()
        .map(|p| load_mask(p))
        .collect::<Result<Vec<_>>>()?;
    Sequence::new(frames, masks)
}

/// File names (lexicographic) of the frames in a directory, for mirroring
/// input names onto outputs.
pub fn frame_file_names(frame_dir: &Path) -> Result<Vec<String>> {
    Ok(list_raster_files(frame_dir)?
        .iter()
        .filter_map(|p| p.file_stem().and_then(|s| s.to_str()).map(String::from))
        .collect())
}

/// Loads all raster files of a directory as frames, lexicographically.
pub fn load_frames(dir: &Path) -> Result<Vec<Frame>> {
    list_raster_files(dir)?.iter().map(|p| load_frame(p)).collect()
}

/// Loads all raster files of a directory as masks, lexicographically.
pub fn load_masks(dir: &Path) -> Result<Vec<Mask>> {
    list_raster_files(dir)?.iter().map(|p| load_mask(p)).collect()
}

/// Saves a frame as 8-bit PNG, quantizing half-up.
pub fn save_frame(frame: &Frame, path: &Path) -> Result<()> {
    let (w, h) = frame.dims();
    let bytes: Vec<u8> = frame
        .data()
        .iter()
        .map(|&v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
        .collect();
    let img = image::RgbImage::from_raw(w as u32, h as u32, bytes).expect("sized buffer");
    img.save(path).map_err(|e| Error::UnreadableFile {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

/// Saves a mask as 8-bit grayscale PNG (hole = 255).
pub fn save_mask(mask: &Mask, path: &Path) -> Result<()> {
    let (w, h) = mask.dims();
    let bytes: Vec<u8> = mask.data().iter().map(|&v| v * 255).collect();
    let img = image::GrayImage::from_raw(w as u32, h as u32, bytes).expect("sized buffer");
    img.save(path).map_err(|e| Error::UnreadableFile {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

/// Reads a Middlebury `.flo` flow field. Validity flags default to all-1.
pub fn read_flo(path: &Path) -> Result<FlowField> {
    let file = File::open(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let mut r = BufReader::new(file);
    let magic = r.read_f32::<LittleEndian>().map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    if magic != FLO_MAGIC {
        return Err(Error::WrongMagic {
            path: path.to_path_buf(),
        });
    }
    let w = r.read_i32::<LittleEndian>().map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let h = r.read_i32::<LittleEndian>().map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    if w < 0 || h < 0 {
        return Err(Error::UnreadableFile {
            path: path.to_path_buf(),
            reason: format!("negative dimensions {w}x{h}"),
        });
    }
    let (w, h) = (w as usize, h as usize);
    let expected = w * h * 2 * 4;
    let mut payload = Vec::with_capacity(expected);
    r.read_to_end(&mut payload).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    if payload.len() < expected {
        return Err(Error::TruncatedFlow {
            path: path.to_path_buf(),
            expected,
            got: payload.len(),
        });
    }
    let mut u = vec![0.0f32; w * h];
    let mut v = vec![0.0f32; w * h];
    for i in 0..w * h {
        let o = i * 8;
        u[i] = f32::from_le_bytes(payload[o..o + 4].try_into().unwrap());
        v[i] = f32::from_le_bytes(payload[o + 4..o + 8].try_into().unwrap());
    }
    FlowField::from_components(w, h, u, v)
}

/// Writes a flow field as Middlebury `.flo`. Validity flags are not stored.
pub fn write_flo(flow: &FlowField, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let mut w = BufWriter::new(file);
    let io_err = |e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    };
    w.write_f32::<LittleEndian>(FLO_MAGIC).map_err(io_err)?;
    w.write_i32::<LittleEndian>(flow.width() as i32)
        .map_err(io_err)?;
    w.write_i32::<LittleEndian>(flow.height() as i32)
        .map_err(io_err)?;
    for i in 0..flow.width() * flow.height() {
        w.write_f32::<LittleEndian>(flow.u[i]).map_err(io_err)?;
        w.write_f32::<LittleEndian>(flow.v[i]).map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

/// Quantizes a frame exactly as [`save_frame`] would, without touching disk.
pub fn quantize_frame_bytes(frame: &Frame) -> Vec<u8> {
    frame
        .data()
        .iter()
        .map(|&v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    #[test]
    fn flo_round_trip_is_bit_exact() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("f.flo");
        let mut flow = FlowField::zero(2, 2);
        for i in 0..4 {
            flow.u[i] = 1.5;
            flow.v[i] = -0.25;
        }
        write_flo(&flow, &path).unwrap();
        let back = read_flo(&path).unwrap();
        assert_eq!(back.u, flow.u);
        assert_eq!(back.v, flow.v);
        assert!(back.valid.iter().all(|&v| v == 1));
    }

    #[test]
    fn flo_one_pixel_file_is_twenty_bytes() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("one.flo");
        write_flo(&FlowField::zero(1, 1), &path).unwrap();
        assert_eq!(fs::metadata(&path).unwrap().len(), 20);
    }

    #[test]
    fn flo_wrong_magic_rejected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.flo");
        fs::write(&path, [0u8; 20]).unwrap();
        match read_flo(&path) {
            Err(Error::WrongMagic { .. }) => {}
            other => panic!("expected WrongMagic, got {other:?}"),
        }
    }

    #[test]
    fn flo_truncated_rejected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("trunc.flo");
        write_flo(&FlowField::zero(4, 4), &path).unwrap();
        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        match read_flo(&path) {
            Err(Error::TruncatedFlow { .. }) => {}
            other => panic!("expected TruncatedFlow, got {other:?}"),
        }
    }

    #[test]
    fn load_sequence_reports_count_mismatch() {
        let dir = tempdir().unwrap();
        let frames = dir.path().join("frames");
        let masks = dir.path().join("masks");
        fs::create_dir(&frames).unwrap();
        fs::create_dir(&masks).unwrap();
        for i in 0..3 {
            save_frame(&Frame::filled(8, 8, 0.5), &frames.join(format!("{i:03}.png"))).unwrap();
        }
        for i in 0..2 {
            save_mask(&Mask::empty(8, 8), &masks.join(format!("{i:03}.png"))).unwrap();
        }
        match load_sequence(&frames, &masks) {
            Err(Error::CountMismatch { frames: 3, masks: 2 }) => {}
            other => panic!("expected CountMismatch, got {other:?}"),
        }
    }

    #[test]
    fn load_sequence_well_formed() {
        let dir = tempdir().unwrap();
        let frames = dir.path().join("frames");
        let masks = dir.path().join("masks");
        fs::create_dir(&frames).unwrap();
        fs::create_dir(&masks).unwrap();
        for i in 0..3 {
            save_frame(&Frame::filled(64, 64, 0.25), &frames.join(format!("{i:03}.png"))).unwrap();
            save_mask(&Mask::empty(64, 64), &masks.join(format!("{i:03}.png"))).unwrap();
        }
        let seq = load_sequence(&frames, &masks).unwrap();
        assert_eq!(seq.len(), 3);
        assert_eq!(seq.width(), 64);
    }

    #[test]
    fn mask_binarization_threshold() {
        // 0.7 * 255 = 178.5 -> 179 on disk -> reloads as hole
        let dir = tempdir().unwrap();
        let path = dir.path().join("m.png");
        let img = image::GrayImage::from_raw(1, 1, vec![179]).unwrap();
        img.save(&path).unwrap();
        let mask = load_mask(&path).unwrap();
        assert!(mask.is_hole(0, 0));

        let img = image::GrayImage::from_raw(1, 1, vec![127]).unwrap();
        img.save(&path).unwrap();
        assert!(!load_mask(&path).unwrap().is_hole(0, 0));
    }

    #[test]
    fn frame_save_load_round_trip_preserves_quantized_values() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("f.png");
        let frame = Frame::from_fn(9, 7, |x, y| {
            [
                (x as f32 / 8.0),
                (y as f32 / 6.0),
                ((x + y) as f32 / 14.0),
            ]
        });
        save_frame(&frame, &path).unwrap();
        let back = load_frame(&path).unwrap();
        for (a, b) in frame.data().iter().zip(back.data()) {
            assert!((a - b).abs() <= 0.5 / 255.0 + 1e-6);
        }
    }
}
