use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::attenuate::Label;
use crate::{Error, Result};

const COLUMNS: [&str; 9] = [
    "scan_id",
    "dataset",
    "volume_path",
    "expert_mask_path",
    "model_mask_path",
    "expert_hu",
    "expert_label",
    "excluded",
    "exclusion_reason",
];
const REQUIRED: [&str; 4] = ["scan_id", "dataset", "volume_path", "expert_mask_path"];

/// One manifest row. Paths are resolved against the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanRecord {
    pub scan_id: String,
    pub dataset: String,
    pub volume_path: PathBuf,
    pub expert_mask_path: Option<PathBuf>,
    pub model_mask_path: Option<PathBuf>,
    pub expert_hu: Option<f64>,
    /// Extra readers (`expert_hu_2`, `expert_hu_3`, ...) in column order.
    pub extra_expert_hu: Vec<Option<f64>>,
    pub expert_label: Option<Label>,
    pub exclusion: Option<String>,
}

impl ScanRecord {
    pub fn is_excluded(&self) -> bool {
        self.exclusion.is_some()
    }
}

/// Parsed manifest plus the names of the extra reader columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub records: Vec<ScanRecord>,
    pub extra_readers: Vec<String>,
}

fn extra_reader_index(name: &str) -> Option<u32> {
    name.strip_prefix("expert_hu_")?
        .parse::<u32>()
        .ok()
        .filter(|&n| n >= 2)
}

fn parse_bool(v: &str) -> Option<bool> {
    match v.trim().to_ascii_lowercase().as_str() {
        "" | "false" | "0" | "no" | "n" => Some(false),
        "true" | "1" | "yes" | "y" => Some(true),
        _ => None,
    }
}

fn parse_label(v: &str) -> Option<Option<Label>> {
    match v.trim().to_ascii_lowercase().as_str() {
        "" => Some(None),
        "pos" | "positive" => Some(Some(Label::Positive)),
        "neg" | "negative" => Some(Some(Label::Negative)),
        _ => None,
    }
}

fn parse_hu(v: &str, column: &str, row: usize) -> Result<Option<f64>> {
    let v = v.trim();
    if v.is_empty() {
        return Ok(None);
    }
    match v.parse::<f64>() {
        Ok(x) if x.is_finite() => Ok(Some(x)),
        _ => Err(Error::Manifest {
            row,
            reason: format!("{column} {v:?} is not a finite number"),
        }),
    }
}

/// Reads and validates a manifest CSV (UTF-8, header row required).
pub fn load_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_manifest(&text, base)
}

pub fn parse_manifest(text: &str, base: &Path) -> Result<Manifest> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Error::Manifest {
            row: 1,
            reason: format!("unreadable header: {e}"),
        })?
        .clone();

    let mut seen = HashSet::new();
    let mut extra: Vec<(u32, usize, String)> = Vec::new();
    for (i, h) in headers.iter().enumerate() {
        if !seen.insert(h.to_string()) {
            return Err(Error::Manifest {
                row: 1,
                reason: format!("duplicate column {h:?}"),
            });
        }
        if let Some(n) = extra_reader_index(h) {
            extra.push((n, i, h.to_string()));
        } else if !COLUMNS.contains(&h) {
            return Err(Error::Manifest {
                row: 1,
                reason: format!("unknown column {h:?}"),
            });
        }
    }
    for r in REQUIRED {
        if !seen.contains(r) {
            return Err(Error::Manifest {
                row: 1,
                reason: format!("missing required column {r:?}"),
            });
        }
    }
    extra.sort();
    let col = |name: &str| headers.iter().position(|h| h == name);

    let resolve = |v: &str| -> Option<PathBuf> {
        let v = v.trim();
        (!v.is_empty()).then(|| {
            let p = PathBuf::from(v);
            if p.is_absolute() {
                p
            } else {
                base.join(p)
            }
        })
    };

    let mut records = Vec::new();
    let mut ids = HashSet::new();
    for (n, rec) in reader.records().enumerate() {
        let row = n + 2;
        let rec = rec.map_err(|e| Error::Manifest {
            row,
            reason: format!("unreadable row: {e}"),
        })?;
        let get = |name: &str| col(name).and_then(|i| rec.get(i)).unwrap_or("");

        let scan_id = get("scan_id").to_string();
        if scan_id.is_empty() {
            return Err(Error::Manifest {
                row,
                reason: "empty scan_id".into(),
            });
        }
        if !ids.insert(scan_id.clone()) {
            return Err(Error::Manifest {
                row,
                reason: format!("duplicate scan_id {scan_id:?}"),
            });
        }

        let flag = parse_bool(get("excluded")).ok_or_else(|| Error::Manifest {
            row,
            reason: format!("excluded {:?} is not a boolean", get("excluded")),
        })?;
        let reason = get("exclusion_reason");
        let exclusion = match (flag, reason.is_empty()) {
            (_, false) => Some(reason.to_string()),
            (true, true) => Some("unspecified".to_string()),
            (false, true) => None,
        };

        let expert_label = parse_label(get("expert_label")).ok_or_else(|| Error::Manifest {
            row,
            reason: format!("expert_label {:?} is not pos/neg", get("expert_label")),
        })?;

        let record = ScanRecord {
            dataset: get("dataset").to_string(),
            volume_path: resolve(get("volume_path")).unwrap_or_default(),
            expert_mask_path: resolve(get("expert_mask_path")),
            model_mask_path: resolve(get("model_mask_path")),
            expert_hu: parse_hu(get("expert_hu"), "expert_hu", row)?,
            extra_expert_hu: extra
                .iter()
                .map(|(_, i, name)| parse_hu(rec.get(*i).unwrap_or(""), name, row))
                .collect::<Result<_>>()?,
            expert_label,
            exclusion,
            scan_id,
        };
        if !record.is_excluded() {
            if record.dataset.is_empty() {
                return Err(Error::Manifest {
                    row,
                    reason: "empty dataset".into(),
                });
            }
            if record.volume_path.as_os_str().is_empty() {
                return Err(Error::Manifest {
                    row,
                    reason: "empty volume_path".into(),
                });
            }
            if record.expert_mask_path.is_none() && record.model_mask_path.is_none() {
                return Err(Error::Manifest {
                    row,
                    reason: "neither expert_mask_path nor model_mask_path given".into(),
                });
            }
        }
        records.push(record);
    }

    Ok(Manifest {
        records,
        extra_readers: extra.into_iter().map(|(_, _, name)| name).collect(),
    })
}
