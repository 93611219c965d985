//! Source CSV readers and the canonical on-disk manifest.
//!
//! Two dialects are understood:
//!
//! - instance-level CSVs with one row per (image, rater, box) and the columns
//!   `image_id, class_name, class_id, rad_id, x_min, y_min, x_max, y_max`.
//!   Pixel coordinates are divided by the image size from a separate dims
//!   table, so every box in a manifest is in normalized coordinates;
//! - image-level CSVs with `Image Index` and a pipe-separated
//!   `Finding Labels` column.
//!
//! In both dialects the "no finding" marker is matched case-insensitively
//! after trimming and never becomes a label or a box.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::fsutil;
use crate::geometry::{clip_box, BBox, RawBox};

pub const MANIFEST_VERSION: &str = "1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Nih,
    Vindr,
    Canonical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub image_id: String,
    pub width: u32,
    pub height: u32,
    pub labels: BTreeSet<u32>,
    #[serde(serialize_with = "serialize_boxes")]
    pub boxes: Vec<BBox>,
}

impl ImageRecord {
    pub fn new(image_id: impl Into<String>, width: u32, height: u32) -> Self {
        Self {
            image_id: image_id.into(),
            width,
            height,
            labels: BTreeSet::new(),
            boxes: Vec::new(),
        }
    }

    /// Labels used for stratification: image-level labels when present,
    /// otherwise the set of box classes.
    pub fn stratification_labels(&self) -> BTreeSet<u32> {
        if self.labels.is_empty() {
            self.boxes.iter().map(BBox::class_id).collect()
        } else {
            self.labels.clone()
        }
    }
}

/// Where a manifest came from and how it was processed. Free-form entries sit
/// next to the source tag in the same JSON object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub source: Source,
    #[serde(flatten)]
    pub entries: BTreeMap<String, String>,
}

impl Provenance {
    pub fn new(source: Source) -> Self {
        let mut entries = BTreeMap::new();
        entries.insert("toolkit_version".to_string(), env!("CARGO_PKG_VERSION").to_string());
        Self { source, entries }
    }

    pub fn set(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.entries.insert(key.into(), value.into());
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub label_names: Vec<String>,
    pub images: Vec<ImageRecord>,
    pub provenance: Provenance,
}

#[derive(Serialize)]
struct ManifestOut<'a> {
    version: &'static str,
    label_names: &'a [String],
    images: &'a [ImageRecord],
    provenance: &'a Provenance,
}

#[derive(Deserialize)]
struct ManifestIn {
    version: String,
    label_names: Vec<String>,
    images: Vec<ImageRecord>,
    provenance: Provenance,
}

impl DatasetManifest {
    pub fn new(label_names: Vec<String>, images: Vec<ImageRecord>, provenance: Provenance) -> Result<Self> {
        let m = Self {
            label_names,
            images,
            provenance,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn box_count(&self) -> usize {
        self.images.iter().map(|r| r.boxes.len()).sum()
    }

    /// Number of boxes per class id, indexed like `label_names`.
    pub fn box_histogram(&self) -> Vec<usize> {
        let mut hist = vec![0; self.label_names.len()];
        for b in self.images.iter().flat_map(|r| &r.boxes) {
            hist[b.class_id() as usize] += 1;
        }
        hist
    }

    /// Number of images carrying each image-level label.
    pub fn label_histogram(&self) -> Vec<usize> {
        let mut hist = vec![0; self.label_names.len()];
        for l in self.images.iter().flat_map(|r| &r.labels) {
            hist[*l as usize] += 1;
        }
        hist
    }

    pub fn find(&self, image_id: &str) -> Option<&ImageRecord> {
        self.images.iter().find(|r| r.image_id == image_id)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::with_capacity(self.images.len());
        let n_labels = self.label_names.len();
        for rec in &self.images {
            if !seen.insert(rec.image_id.as_str()) {
                return Err(Error::DuplicateImage {
                    image_id: rec.image_id.clone(),
                });
            }
            if rec.width == 0 || rec.height == 0 {
                return Err(Error::InvalidManifest(format!(
                    "image '{}' has zero width or height",
                    rec.image_id
                )));
            }
            if let Some(b) = rec.boxes.iter().find(|b| b.class_id() as usize >= n_labels) {
                return Err(Error::InvalidManifest(format!(
                    "image '{}' has a box with class id {} but only {} label names",
                    rec.image_id,
                    b.class_id(),
                    n_labels
                )));
            }
            if let Some(l) = rec.labels.iter().find(|l| **l as usize >= n_labels) {
                return Err(Error::InvalidManifest(format!(
                    "image '{}' has label {} but only {} label names",
                    rec.image_id, l, n_labels
                )));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let out = ManifestOut {
            version: MANIFEST_VERSION,
            label_names: &self.label_names,
            images: &self.images,
            provenance: &self.provenance,
        };
        let mut s = serde_json::to_string_pretty(&out)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let found = match value.get("version") {
            Some(serde_json::Value::String(s)) => s.clone(),
            Some(other) => other.to_string(),
            None => String::from("<missing>"),
        };
        if found != MANIFEST_VERSION {
            return Err(Error::SchemaVersionMismatch {
                found,
                expected: MANIFEST_VERSION.to_string(),
            });
        }
        let raw: ManifestIn = serde_json::from_value(value)?;
        debug_assert_eq!(raw.version, MANIFEST_VERSION);
        DatasetManifest::new(raw.label_names, raw.images, raw.provenance)
    }
}

/// Round to 9 significant decimal digits.
pub fn round_sig9(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.8e}").parse().unwrap_or(x)
}

fn serialize_boxes<S: Serializer>(boxes: &[BBox], ser: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = ser.serialize_seq(Some(boxes.len()))?;
    for b in boxes {
        let mut raw = RawBox::from(b.clone());
        raw.x_min = round_sig9(raw.x_min);
        raw.y_min = round_sig9(raw.y_min);
        raw.x_max = round_sig9(raw.x_max);
        raw.y_max = round_sig9(raw.y_max);
        seq.serialize_element(&raw)?;
    }
    seq.end()
}

pub fn save_manifest(m: &DatasetManifest, path: &Path) -> Result<()> {
    fsutil::write_atomic(path, m.to_json()?.as_bytes())
}

pub fn load_manifest(path: &Path) -> Result<DatasetManifest> {
    DatasetManifest::from_json(&fsutil::read_to_string(path)?)
}

pub fn is_no_finding(name: &str) -> bool {
    name.trim().eq_ignore_ascii_case("no finding")
}

/// Reads an `image_id,width,height` table.
pub fn read_dims_csv<R: Read>(reader: R) -> Result<HashMap<String, (u32, u32)>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let id_col = column(&headers, "image_id")?;
    let w_col = column(&headers, "width")?;
    let h_col = column(&headers, "height")?;
    let mut dims = HashMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec?;
        let w: u32 = parse_field(&rec, w_col, row, "width")?;
        let h: u32 = parse_field(&rec, h_col, row, "height")?;
        if w == 0 || h == 0 {
            return Err(Error::MalformedRow {
                row,
                message: "width and height must be positive".into(),
            });
        }
        dims.insert(rec[id_col].to_string(), (w, h));
    }
    Ok(dims)
}

fn column(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| Error::MalformedRow {
            row: 0,
            message: format!("missing column '{name}'"),
        })
}

fn parse_field<T: std::str::FromStr>(
    rec: &csv::StringRecord,
    col: usize,
    row: usize,
    name: &str,
) -> Result<T> {
    let raw = rec.get(col).unwrap_or("").trim();
    raw.parse().map_err(|_| Error::MalformedRow {
        row,
        message: format!("cannot parse {name} from '{raw}'"),
    })
}

/// Parse an instance-level annotation CSV. Row numbers in errors count data
/// rows from 1; the header is row 0.
pub fn parse_vindr_csv<R: Read>(
    reader: R,
    image_dims: &HashMap<String, (u32, u32)>,
) -> Result<DatasetManifest> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let id_c = column(&headers, "image_id")?;
    let name_c = column(&headers, "class_name")?;
    let cls_c = column(&headers, "class_id")?;
    let rad_c = column(&headers, "rad_id")?;
    let x0_c = column(&headers, "x_min")?;
    let y0_c = column(&headers, "y_min")?;
    let x1_c = column(&headers, "x_max")?;
    let y1_c = column(&headers, "y_max")?;

    let mut images: Vec<ImageRecord> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut names: BTreeMap<u32, String> = BTreeMap::new();

    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec?;
        let image_id = rec.get(id_c).unwrap_or("").trim();
        if image_id.is_empty() {
            return Err(Error::MalformedRow {
                row,
                message: "empty image_id".into(),
            });
        }
        let slot = match index.get(image_id) {
            Some(&k) => k,
            None => {
                let &(w, h) = image_dims.get(image_id).ok_or_else(|| Error::MissingDimension {
                    image_id: image_id.to_string(),
                })?;
                images.push(ImageRecord::new(image_id, w, h));
                index.insert(image_id.to_string(), images.len() - 1);
                images.len() - 1
            }
        };

        let class_name = rec.get(name_c).unwrap_or("").trim();
        if is_no_finding(class_name) {
            continue;
        }
        let class_id: u32 = parse_field(&rec, cls_c, row, "class_id")?;
        match names.get(&class_id) {
            Some(existing) if existing != class_name => {
                return Err(Error::MalformedRow {
                    row,
                    message: format!(
                        "class_id {class_id} named '{class_name}' but earlier '{existing}'"
                    ),
                })
            }
            Some(_) => {}
            None => {
                names.insert(class_id, class_name.to_string());
            }
        }

        let x0: f64 = parse_field(&rec, x0_c, row, "x_min")?;
        let y0: f64 = parse_field(&rec, y0_c, row, "y_min")?;
        let x1: f64 = parse_field(&rec, x1_c, row, "x_max")?;
        let y1: f64 = parse_field(&rec, y1_c, row, "y_max")?;
        if ![x0, y0, x1, y1].iter().all(|v| v.is_finite()) {
            return Err(Error::MalformedRow {
                row,
                message: "non-finite coordinate".into(),
            });
        }
        if x0 > x1 || y0 > y1 {
            return Err(Error::MalformedRow {
                row,
                message: format!("inverted box ({x0}, {y0}, {x1}, {y1})"),
            });
        }
        let rater = rec.get(rad_c).map(str::trim).filter(|s| !s.is_empty());
        let rec_ref = &images[slot];
        let (w, h) = (rec_ref.width as f64, rec_ref.height as f64);
        let raw = RawBox {
            class_id,
            x_min: x0 / w,
            y_min: y0 / h,
            x_max: x1 / w,
            y_max: y1 / h,
            score: 1.0,
            rater_id: rater.map(str::to_string),
        };
        let bbox = clip_box(&raw).map_err(|e| match e {
            Error::DegenerateBox(msg) => Error::DegenerateBox(format!("row {row}: {msg}")),
            other => other,
        })?;
        images[slot].boxes.push(bbox);
    }

    let n_labels = names.keys().next_back().map_or(0, |&k| k as usize + 1);
    let label_names = (0..n_labels as u32)
        .map(|k| names.get(&k).cloned().unwrap_or_else(|| format!("class_{k}")))
        .collect();
    let mut provenance = Provenance::new(Source::Vindr);
    provenance.set("normalized", "true");
    DatasetManifest::new(label_names, images, provenance)
}

/// Parse an image-level label CSV. Image dimensions are taken from the
/// `OriginalImage[Width` / `Height]` columns when present; otherwise they are
/// recorded as 1x1 and provenance notes `dims=unknown`.
pub fn parse_nih_csv<R: Read>(reader: R) -> Result<DatasetManifest> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let id_c = column(&headers, "Image Index")?;
    let labels_c = column(&headers, "Finding Labels")?;
    let w_c = column(&headers, "OriginalImage[Width").ok();
    let h_c = column(&headers, "Height]").ok();
    let dims_known = w_c.is_some() && h_c.is_some();

    let mut label_names: Vec<String> = Vec::new();
    let mut label_index: HashMap<String, u32> = HashMap::new();
    let mut images = Vec::new();
    let mut seen = HashSet::new();

    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec?;
        let image_id = rec.get(id_c).unwrap_or("").trim();
        if image_id.is_empty() {
            return Err(Error::MalformedRow {
                row,
                message: "empty image id".into(),
            });
        }
        if !seen.insert(image_id.to_string()) {
            return Err(Error::DuplicateImage {
                image_id: image_id.to_string(),
            });
        }
        let (w, h) = match (w_c, h_c) {
            (Some(wc), Some(hc)) => (
                parse_field::<u32>(&rec, wc, row, "width")?,
                parse_field::<u32>(&rec, hc, row, "height")?,
            ),
            _ => (1, 1),
        };
        let mut record = ImageRecord::new(image_id, w.max(1), h.max(1));
        for label in rec.get(labels_c).unwrap_or("").split('|') {
            let label = label.trim();
            if label.is_empty() || is_no_finding(label) {
                continue;
            }
            let id = *label_index.entry(label.to_string()).or_insert_with(|| {
                label_names.push(label.to_string());
                (label_names.len() - 1) as u32
            });
            record.labels.insert(id);
        }
        images.push(record);
    }

    let mut provenance = Provenance::new(Source::Nih);
    provenance.set("dims", if dims_known { "csv" } else { "unknown" });
    DatasetManifest::new(label_names, images, provenance)
}
