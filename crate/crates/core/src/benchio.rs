//! OTB-style benchmark sequences on disk.
//!
//! ```text
//! <root>/<Name>/img/0001.jpg ...
//! <root>/<Name>/groundtruth_rect.txt   one "x,y,w,h" per line (comma, tab or space)
//! <root>/<Name>/attrs.txt              optional, one attribute code per line
//! <root>/<Name>/manifest.json          optional, see [`Manifest`]
//! ```

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imgproc::{BBox, FrameScale, Image};

pub type EvalBox = BBox;

/// Sequence attribute tags of the benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Attribute {
    LR,
    IPR,
    OPR,
    SV,
    OCC,
    DEF,
    BC,
    IV,
    MB,
    FM,
    OV,
}

impl Attribute {
    pub const ALL: [Attribute; 11] = [
        Attribute::LR,
        Attribute::IPR,
        Attribute::OPR,
        Attribute::SV,
        Attribute::OCC,
        Attribute::DEF,
        Attribute::BC,
        Attribute::IV,
        Attribute::MB,
        Attribute::FM,
        Attribute::OV,
    ];

    pub fn code(self) -> &'static str {
        match self {
            Attribute::LR => "LR",
            Attribute::IPR => "IPR",
            Attribute::OPR => "OPR",
            Attribute::SV => "SV",
            Attribute::OCC => "OCC",
            Attribute::DEF => "DEF",
            Attribute::BC => "BC",
            Attribute::IV => "IV",
            Attribute::MB => "MB",
            Attribute::FM => "FM",
            Attribute::OV => "OV",
        }
    }
}

impl FromStr for Attribute {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        Attribute::ALL
            .into_iter()
            .find(|a| a.code().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::invalid(format!("unknown attribute code {s:?}")))
    }
}

/// Optional per-sequence overrides for dataset quirks.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Manifest {
    /// First frame number to use (inclusive, as numbered on disk).
    pub start_frame: Option<u64>,
    /// Last frame number to use (inclusive).
    pub end_frame: Option<u64>,
    /// Ground-truth field delimiter; by default any of comma, tab, space.
    pub delimiter: Option<String>,
    /// Ground-truth file name relative to the sequence directory.
    pub groundtruth: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    pub name: String,
    pub dir: PathBuf,
    pub frames: Vec<PathBuf>,
    pub groundtruth: Vec<BBox>,
    pub attributes: Vec<Attribute>,
    pub color: bool,
    /// Original frame size `(width, height)`.
    pub frame_size: (usize, usize),
    /// Maps original coordinates onto those of `groundtruth`.
    pub scale: FrameScale,
}

impl Sequence {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn has_attribute(&self, a: Attribute) -> bool {
        self.attributes.contains(&a)
    }

    /// Lazily decoded frames starting at `start`.
    pub fn frames_from(&self, start: usize) -> impl Iterator<Item = Result<Image>> + '_ {
        self.frames[start..].iter().map(|p| decode_image(p))
    }
}

fn is_image(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| matches!(e.to_ascii_lowercase().as_str(), "jpg" | "jpeg" | "png"))
        .unwrap_or(false)
}

fn frame_number(path: &Path) -> Option<u64> {
    path.file_stem()?.to_str()?.parse().ok()
}

pub fn parse_groundtruth(text: &str, delimiter: Option<&str>, path: &Path) -> Result<Vec<BBox>> {
    let mut boxes = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = match delimiter {
            Some(d) => line.split(d).map(str::trim).filter(|f| !f.is_empty()).collect(),
            None => line
                .split(|c: char| c == ',' || c == '\t' || c == ' ')
                .filter(|f| !f.is_empty())
                .collect(),
        };
        let bad = |reason: String| Error::MalformedFile {
            path: path.to_path_buf(),
            reason: format!("line {}: {reason}", lineno + 1),
        };
        if fields.len() != 4 {
            return Err(bad(format!("expected 4 fields, found {}", fields.len())));
        }
        let mut v = [0.0; 4];
        for (slot, f) in v.iter_mut().zip(&fields) {
            *slot = f.parse().map_err(|_| bad(format!("cannot parse {f:?} as a number")))?;
        }
        if !(v[2] >= 1.0 && v[3] >= 1.0) {
            return Err(bad(format!("box size {}x{} is below one pixel", v[2], v[3])));
        }
        boxes.push(BBox::new(v[0], v[1], v[2], v[3]));
    }
    Ok(boxes)
}

/// Reads `manifest.json` from a sequence directory, or the defaults.
pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join("manifest.json");
    if !path.is_file() {
        return Ok(Manifest::default());
    }
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::MalformedFile {
        path: path.clone(),
        reason: e.to_string(),
    })
}

/// Frame files under `dir/img`, in numeric order, limited to the manifest range.
pub fn list_frames(dir: &Path, manifest: &Manifest) -> Result<Vec<PathBuf>> {
    let img_dir = dir.join("img");
    if !img_dir.is_dir() {
        return Err(Error::NotFound(format!("{} (frame directory)", img_dir.display())));
    }
    let mut numbered: Vec<(u64, PathBuf)> = Vec::new();
    let entries = fs::read_dir(&img_dir).map_err(|e| Error::io(&img_dir, e))?;
    for entry in entries {
        let path = entry.map_err(|e| Error::io(&img_dir, e))?.path();
        if !is_image(&path) {
            continue;
        }
        let n = frame_number(&path).ok_or_else(|| Error::MalformedFile {
            path: path.clone(),
            reason: "frame file name is not a number".into(),
        })?;
        if manifest.start_frame.is_some_and(|s| n < s) || manifest.end_frame.is_some_and(|e| n > e) {
            continue;
        }
        numbered.push((n, path));
    }
    numbered.sort();
    if let Some(w) = numbered.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(Error::MalformedFile {
            path: w[1].1.clone(),
            reason: format!("duplicate frame number {}", w[0].0),
        });
    }
    if numbered.is_empty() {
        return Err(Error::NotFound(format!("{} (no frames)", img_dir.display())));
    }
    Ok(numbered.into_iter().map(|(_, p)| p).collect())
}

pub fn load_sequence(dir: &Path) -> Result<Sequence> {
    let name = dir
        .file_name()
        .and_then(|n| n.to_str())
        .unwrap_or_default()
        .to_string();
    let manifest = read_manifest(dir)?;
    let frames = list_frames(dir, &manifest)?;

    let gt_path = dir.join(manifest.groundtruth.as_deref().unwrap_or("groundtruth_rect.txt"));
    if !gt_path.is_file() {
        return Err(Error::NotFound(gt_path.display().to_string()));
    }
    let text = fs::read_to_string(&gt_path).map_err(|e| Error::io(&gt_path, e))?;
    let groundtruth = parse_groundtruth(&text, manifest.delimiter.as_deref(), &gt_path)?;
    if groundtruth.len() != frames.len() {
        return Err(Error::MalformedDataset {
            path: dir.to_path_buf(),
            frames: frames.len(),
            boxes: groundtruth.len(),
        });
    }

    let attrs_path = dir.join("attrs.txt");
    let mut attributes = Vec::new();
    if attrs_path.is_file() {
        let text = fs::read_to_string(&attrs_path).map_err(|e| Error::io(&attrs_path, e))?;
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            for code in line.split([',', ' ', '\t']).filter(|c| !c.is_empty()) {
                let a: Attribute = code.parse()?;
                if !attributes.contains(&a) {
                    attributes.push(a);
                }
            }
        }
    }

    let first = decode_image(&frames[0])?;
    Ok(Sequence {
        name,
        dir: dir.to_path_buf(),
        color: first.is_color() && !first.is_effectively_gray(),
        frame_size: (first.width(), first.height()),
        frames,
        groundtruth,
        attributes,
        scale: FrameScale::IDENTITY,
    })
}

/// Sequence directories under `root` (those holding an `img/` folder), by name.
pub fn list_sequences(root: &Path) -> Result<Vec<String>> {
    let entries = fs::read_dir(root).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::NotFound(root.display().to_string()),
        _ => Error::io(root, e),
    })?;
    let mut names: Vec<String> = entries
        .filter_map(|e| e.ok())
        .filter(|e| e.path().join("img").is_dir())
        .filter_map(|e| e.file_name().to_str().map(str::to_string))
        .collect();
    names.sort();
    Ok(names)
}

pub fn decode_image(path: &Path) -> Result<Image> {
    let decode_err = |reason: String| Error::Decode {
        path: path.to_path_buf(),
        reason,
    };
    let reader = image::ImageReader::open(path)
        .map_err(|e| decode_err(e.to_string()))?
        .with_guessed_format()
        .map_err(|e| decode_err(e.to_string()))?;
    let img = reader.decode().map_err(|e| decode_err(e.to_string()))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let gray = matches!(
        img.color(),
        image::ColorType::L8 | image::ColorType::La8 | image::ColorType::L16 | image::ColorType::La16
    );
    if gray {
        Image::new(w, h, 1, img.into_luma8().into_raw())
    } else {
        Image::new(w, h, 3, img.into_rgb8().into_raw())
    }
}

/// Rescales the ground truth onto a `to = (width, height)` frame. The
/// resulting `scale` field maps original to new coordinates and its inverse
/// recovers the original boxes.
pub fn scale_groundtruth(seq: &Sequence, to: (usize, usize)) -> Sequence {
    let step = FrameScale::between(seq.frame_size, to);
    let total = FrameScale {
        fx: seq.scale.fx * step.fx,
        fy: seq.scale.fy * step.fy,
    };
    Sequence {
        groundtruth: seq.groundtruth.iter().map(|b| step.forward(b)).collect(),
        frame_size: to,
        scale: total,
        ..seq.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_standard_line() {
        let b = parse_groundtruth("198,214,34,81\n", None, Path::new("gt")).unwrap();
        assert_eq!(b, vec![BBox::new(198.0, 214.0, 34.0, 81.0)]);
        let b = parse_groundtruth("1\t2\t3\t4\n5 6 7 8\n\n", None, Path::new("gt")).unwrap();
        assert_eq!(b.len(), 2);
        assert_eq!(b[1], BBox::new(5.0, 6.0, 7.0, 8.0));
        let b = parse_groundtruth("1;2;3;4", Some(";"), Path::new("gt")).unwrap();
        assert_eq!(b[0].h, 4.0);
    }

    #[test]
    fn rejects_malformed_lines() {
        assert!(parse_groundtruth("1,2,3", None, Path::new("gt")).is_err());
        assert!(parse_groundtruth("1,2,x,4", None, Path::new("gt")).is_err());
        assert!(parse_groundtruth("1,2,0,4", None, Path::new("gt")).is_err());
    }

    #[test]
    fn attribute_codes_parse() {
        assert_eq!("occ".parse::<Attribute>().unwrap(), Attribute::OCC);
        assert!("XYZ".parse::<Attribute>().is_err());
    }

    fn dummy(frame_size: (usize, usize)) -> Sequence {
        Sequence {
            name: "s".into(),
            dir: PathBuf::new(),
            frames: vec![PathBuf::from("a")],
            groundtruth: vec![BBox::new(100.0, 100.0, 50.0, 50.0)],
            attributes: vec![],
            color: true,
            frame_size,
            scale: FrameScale::IDENTITY,
        }
    }

    #[test]
    fn scaling_halves_vga() {
        let s = scale_groundtruth(&dummy((640, 480)), (320, 240));
        assert_eq!(s.scale, FrameScale { fx: 0.5, fy: 0.5 });
        assert_eq!(s.groundtruth[0], BBox::new(50.0, 50.0, 25.0, 25.0));
    }

    #[test]
    fn scaling_identity_and_round_trip() {
        let s = scale_groundtruth(&dummy((320, 240)), (320, 240));
        assert_eq!(s.groundtruth, dummy((320, 240)).groundtruth);
        let odd = scale_groundtruth(&dummy((417, 233)), (320, 240));
        let back = odd.scale.inverse(&odd.groundtruth[0]);
        let orig = dummy((1, 1)).groundtruth[0];
        for (a, b) in [(back.x, orig.x), (back.y, orig.y), (back.w, orig.w), (back.h, orig.h)] {
            assert!((a - b).abs() < 1e-9);
        }
    }
}
