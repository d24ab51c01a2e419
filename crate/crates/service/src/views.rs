//! Camera views as PNG: 8-bit label ids and 16-bit depth in millimeters.

use base64::Engine;
use occ_core::geometry::CameraModel;
use occ_core::synth::{DepthImage, FrameSensorData, SemanticImage};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViewPayload {
    pub camera: CameraModel,
    pub width: usize,
    pub height: usize,
    /// Base64 PNG, 8-bit grayscale, one label id per pixel.
    pub semantic_png: String,
    /// Base64 PNG, 16-bit grayscale, depth in millimeters (0 = no hit).
    pub depth_png: String,
}

fn encode(width: usize, height: usize, depth: png::BitDepth, data: &[u8]) -> Vec<u8> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, width as u32, height as u32);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(depth);
        let mut writer = enc.write_header().expect("png header");
        writer.write_image_data(data).expect("png data");
    }
    out
}

pub fn semantic_png(img: &SemanticImage) -> Vec<u8> {
    let data: Vec<u8> = img.labels.iter().map(|l| l.id()).collect();
    encode(img.width, img.height, png::BitDepth::Eight, &data)
}

/// Millimeter depth, rounded and clamped to `u16`.
pub fn depth_mm(d: f64) -> u16 {
    if d > 0.0 {
        (d * 1000.0).round().min(u16::MAX as f64) as u16
    } else {
        0
    }
}

pub fn depth_png(img: &DepthImage) -> Vec<u8> {
    // PNG stores 16-bit samples big-endian.
    let data: Vec<u8> = img.depth.iter().flat_map(|&d| depth_mm(d).to_be_bytes()).collect();
    encode(img.width, img.height, png::BitDepth::Sixteen, &data)
}

pub fn payload(frame: &FrameSensorData) -> Vec<ViewPayload> {
    let b64 = base64::engine::general_purpose::STANDARD;
    frame
        .cameras
        .iter()
        .zip(&frame.semantic_images)
        .zip(&frame.depth_images)
        .map(|((cam, sem), dep)| ViewPayload {
            camera: *cam,
            width: sem.width,
            height: sem.height,
            semantic_png: b64.encode(semantic_png(sem)),
            depth_png: b64.encode(depth_png(dep)),
        })
        .collect()
}

/// Decodes a grayscale PNG to `(width, height, bit depth, raw samples)`.
pub fn decode_png(bytes: &[u8]) -> Result<(usize, usize, u8, Vec<u8>), String> {
    let decoder = png::Decoder::new(std::io::Cursor::new(bytes));
    let mut reader = decoder.read_info().map_err(|e| e.to_string())?;
    let mut buf = vec![0; reader.output_buffer_size().ok_or("png too large")?];
    let info = reader.next_frame(&mut buf).map_err(|e| e.to_string())?;
    buf.truncate(info.buffer_size());
    Ok((info.width as usize, info.height as usize, info.bit_depth as u8, buf))
}
