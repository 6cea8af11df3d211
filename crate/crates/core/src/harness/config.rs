//! Flat `key = value` configuration for [`SimConfig`].
//!
//! One assignment per line. `#` starts a comment, values may be wrapped in
//! double quotes, and ranges are written `lo..hi` (a single number is a
//! degenerate range). Unknown keys are errors.
//!
//! | key | value |
//! |-----|-------|
//! | `n_trials`, `max_iters`, `seed` | integer |
//! | `loss` | metric name |
//! | `lr`, `lr_theta`, `stop_tol`, `min_extent`, `iou_target` | number |
//! | `image_w`, `image_h` | number |
//! | `size`, `aspect`, `angle`, `offset`, `init_scale`, `init_aspect` | range |
//! | `disjoint`, `kfiou_normalized` | `true` / `false` |
//! | `enclosing` | `hull` / `aabb` |
//! | `piou_k`, `piou_step` | number |

use thiserror::Error;

use crate::geom::ImageDims;
use crate::iou::Enclosing;

use super::sim::{Range, SimConfig};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected 'key = value'")]
    Syntax { line: usize },
    #[error("line {line}: unknown key '{key}'")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: invalid value for '{key}': {message}")]
    InvalidValue { line: usize, key: String, message: String },
}

/// Split text into `(line, key, value)` triples.
pub fn parse_pairs(text: &str) -> Result<Vec<(usize, String, String)>, ConfigError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or(ConfigError::Syntax { line: i + 1 })?;
        let k = k.trim();
        let v = v.trim();
        let v = v.strip_prefix('"').and_then(|s| s.strip_suffix('"')).unwrap_or(v);
        if k.is_empty() {
            return Err(ConfigError::Syntax { line: i + 1 });
        }
        out.push((i + 1, k.to_string(), v.to_string()));
    }
    Ok(out)
}

fn num(v: &str) -> Result<f64, String> {
    v.parse::<f64>().map_err(|e| e.to_string())
}

fn range(v: &str) -> Result<Range, String> {
    match v.split_once("..") {
        Some((lo, hi)) => Range::new(num(lo.trim())?, num(hi.trim())?),
        None => {
            let x = num(v)?;
            Range::new(x, x)
        }
    }
}

fn boolean(v: &str) -> Result<bool, String> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(format!("expected true or false, got '{v}'")),
    }
}

impl SimConfig {
    /// Set one field by key. `line` only labels errors.
    pub fn set(&mut self, key: &str, value: &str, line: usize) -> Result<(), ConfigError> {
        let invalid = |message: String| ConfigError::InvalidValue {
            line,
            key: key.to_string(),
            message,
        };
        let int = |v: &str| v.parse::<u64>().map_err(|e| invalid(e.to_string()));
        let dims = |w: f64, h: f64| ImageDims::new(w, h).map_err(|e| invalid(e.to_string()));
        match key {
            "n_trials" => self.n_trials = int(value)? as usize,
            "max_iters" => self.max_iters = int(value)? as usize,
            "seed" => self.seed = int(value)?,
            "loss" => self.loss = value.parse().map_err(invalid)?,
            "lr" => self.lr = num(value).map_err(invalid)?,
            "lr_theta" => self.lr_theta = num(value).map_err(invalid)?,
            "stop_tol" => self.stop_tol = num(value).map_err(invalid)?,
            "min_extent" => self.min_extent = num(value).map_err(invalid)?,
            "iou_target" => self.iou_target = num(value).map_err(invalid)?,
            "image_w" => self.image_dims = dims(num(value).map_err(invalid)?, self.image_dims.h())?,
            "image_h" => self.image_dims = dims(self.image_dims.w(), num(value).map_err(invalid)?)?,
            "size" => self.init.size = range(value).map_err(invalid)?,
            "aspect" => self.init.aspect = range(value).map_err(invalid)?,
            "angle" => self.init.angle = range(value).map_err(invalid)?,
            "offset" => self.init.offset = range(value).map_err(invalid)?,
            "init_scale" => self.init.init_scale = range(value).map_err(invalid)?,
            "init_aspect" => self.init.init_aspect = range(value).map_err(invalid)?,
            "disjoint" => self.init.disjoint = boolean(value).map_err(invalid)?,
            "kfiou_normalized" => self.kfiou_normalized = boolean(value).map_err(invalid)?,
            "enclosing" => {
                self.enclosing = match value {
                    "hull" => Enclosing::Hull,
                    "aabb" => Enclosing::Aabb,
                    _ => return Err(invalid(format!("expected hull or aabb, got '{value}'"))),
                }
            }
            "piou_k" => self.piou_k = num(value).map_err(invalid)?,
            "piou_step" => self.piou_step = num(value).map_err(invalid)?,
            _ => {
                return Err(ConfigError::UnknownKey {
                    line,
                    key: key.to_string(),
                })
            }
        }
        Ok(())
    }

    /// Apply every assignment in `text` on top of `self`.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (line, k, v) in parse_pairs(text)? {
            self.set(&k, &v, line)?;
        }
        Ok(())
    }
}
