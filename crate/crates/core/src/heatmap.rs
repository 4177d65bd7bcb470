//! Binary portable pixmap (P6) rendering of one- and two-dimensional fields.
//!
//! Pixel `i` is site `i` in canonical order: rows follow the first axis and
//! columns the last.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::LatticeField;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Palette {
    /// Linear min-max map to 8-bit gray.
    Grayscale,
    /// Blue-white-red, symmetric about zero.
    #[default]
    Diverging,
}

impl std::str::FromStr for Palette {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "grayscale" | "gray" => Ok(Palette::Grayscale),
            "diverging" => Ok(Palette::Diverging),
            other => Err(Error::Config(format!("unknown palette '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Heatmap {
    pub width: usize,
    pub height: usize,
    pub min: f64,
    pub max: f64,
    pub palette: Palette,
    /// Row-major RGB triples.
    #[serde(skip)]
    pub pixels: Vec<[u8; 3]>,
}

impl Heatmap {
    /// `P6` header followed by the raw RGB bytes.
    pub fn to_ppm(&self) -> Vec<u8> {
        self.to_ppm_annotated(None)
    }

    /// As [`Heatmap::to_ppm`] with an optional `#` comment line after the magic number.
    pub fn to_ppm_annotated(&self, comment: Option<&str>) -> Vec<u8> {
        let mut out = b"P6\n".to_vec();
        if let Some(c) = comment {
            for line in c.lines() {
                out.extend_from_slice(format!("# {line}\n").as_bytes());
            }
        }
        out.extend_from_slice(format!("{} {}\n255\n", self.width, self.height).as_bytes());
        out.reserve(3 * self.pixels.len());
        for p in &self.pixels {
            out.extend_from_slice(p);
        }
        out
    }
}

fn gray_level(x: f64, min: f64, max: f64) -> u8 {
    if max > min {
        (255.0 * (x - min) / (max - min)).round().clamp(0.0, 255.0) as u8
    } else {
        0
    }
}

fn diverging(x: f64, scale: f64) -> [u8; 3] {
    if scale == 0.0 {
        return [255, 255, 255];
    }
    let t = (x / scale).clamp(-1.0, 1.0);
    let fade = (255.0 * (1.0 - t.abs())).round() as u8;
    if t >= 0.0 {
        [255, fade, fade]
    } else {
        [fade, fade, 255]
    }
}

pub fn render(field: &LatticeField<f64>, palette: Palette) -> Result<Heatmap> {
    let g = field.grid();
    let (height, width) = match g.dim() {
        1 => (1, g.side()),
        2 => (g.side(), g.side()),
        d => return Err(Error::InvalidArgument(format!("heatmaps need d <= 2, got {d}"))),
    };
    let v = field.values();
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument("field has non-finite values".into()));
    }
    let min = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let scale = min.abs().max(max.abs());
    let pixels = v
        .iter()
        .map(|&x| match palette {
            Palette::Grayscale => [gray_level(x, min, max); 3],
            Palette::Diverging => diverging(x, scale),
        })
        .collect();
    Ok(Heatmap {
        width,
        height,
        min,
        max,
        palette,
        pixels,
    })
}
