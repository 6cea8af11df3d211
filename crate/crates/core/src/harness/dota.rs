//! DOTA-style annotation text.
//!
//! Ground truth lines are `x1 y1 x2 y2 x3 y3 x4 y4 category difficulty`.
//! Prediction lines append a confidence score. Blank lines, `#` comments
//! and header lines whose first token contains `:` (`imagesource:…`,
//! `gsd:…`) are skipped. Columns in errors are 1-based character offsets.

use std::io::BufRead;

use thiserror::Error;

use crate::geom::{box_from_corners, sort_corners, CornerQuad, GeomError, Point2, RotatedBox, EPS_GEOM};

#[derive(Debug, Error)]
pub enum DotaError {
    #[error("line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("line {line}: {message}")]
    Geometry { line: usize, message: String },
    #[error("read error: {0}")]
    Io(#[from] std::io::Error),
}

/// One labelled quadrilateral.
#[derive(Clone, Debug, PartialEq)]
pub struct Annotation {
    /// Corners in canonical sorted order.
    pub quad: CornerQuad,
    pub category: String,
    pub difficulty: u8,
    /// 1-based source line.
    pub line: usize,
}

impl Annotation {
    /// The rectangle these corners describe, if they describe one.
    pub fn to_box(&self) -> Result<RotatedBox, GeomError> {
        box_from_corners(&self.quad)
    }
}

/// An [`Annotation`] with a confidence score.
#[derive(Clone, Debug, PartialEq)]
pub struct Detection {
    pub annotation: Annotation,
    pub score: f64,
}

struct Token<'a> {
    text: &'a str,
    column: usize,
}

fn tokenize(line: &str) -> Vec<Token<'_>> {
    let mut out = Vec::new();
    let mut start = None;
    for (col, (idx, ch)) in line.char_indices().enumerate() {
        match (ch.is_whitespace(), start) {
            (false, None) => start = Some((idx, col)),
            (true, Some((s, c))) => {
                out.push(Token { text: &line[s..idx], column: c + 1 });
                start = None;
            }
            _ => {}
        }
    }
    if let Some((s, c)) = start {
        out.push(Token { text: &line[s..], column: c + 1 });
    }
    out
}

fn is_skipped(tokens: &[Token<'_>]) -> bool {
    match tokens.first() {
        None => true,
        Some(t) => t.text.starts_with('#') || t.text.contains(':'),
    }
}

fn parse_num(t: &Token<'_>, line: usize, what: &str) -> Result<f64, DotaError> {
    match t.text.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(DotaError::Parse {
            line,
            column: t.column,
            message: format!("expected a finite {what}, found '{}'", t.text),
        }),
    }
}

fn segments_cross(p1: Point2, p2: Point2, q1: Point2, q2: Point2) -> bool {
    let d1 = p2.sub(p1).cross(q1.sub(p1));
    let d2 = p2.sub(p1).cross(q2.sub(p1));
    let d3 = q2.sub(q1).cross(p1.sub(q1));
    let d4 = q2.sub(q1).cross(p2.sub(q1));
    d1 * d2 < 0.0 && d3 * d4 < 0.0
}

/// Reject quads whose given vertex order self-intersects or encloses no area.
fn check_simple(pts: &[Point2; 4], line: usize) -> Result<(), DotaError> {
    if segments_cross(pts[0], pts[1], pts[2], pts[3]) || segments_cross(pts[1], pts[2], pts[3], pts[0]) {
        return Err(DotaError::Geometry {
            line,
            message: "self-intersecting quadrilateral".into(),
        });
    }
    let twice_area: f64 = (0..4).map(|i| pts[i].cross(pts[(i + 1) % 4])).sum();
    if twice_area.abs() / 2.0 <= EPS_GEOM {
        return Err(DotaError::Geometry {
            line,
            message: "degenerate quadrilateral (zero area)".into(),
        });
    }
    Ok(())
}

fn parse_record(tokens: &[Token<'_>], line: usize, with_score: bool, raw_len: usize) -> Result<(Annotation, f64), DotaError> {
    let expected = if with_score { 11 } else { 10 };
    if tokens.len() != expected {
        let column = tokens.get(expected).map_or(raw_len + 1, |t| t.column);
        return Err(DotaError::Parse {
            line,
            column,
            message: format!("expected {expected} fields, found {}", tokens.len()),
        });
    }
    let mut coords = [0.0; 8];
    for (c, t) in coords.iter_mut().zip(tokens) {
        *c = parse_num(t, line, "coordinate")?;
    }
    let pts = [0, 1, 2, 3].map(|i| Point2::new(coords[2 * i], coords[2 * i + 1]));
    check_simple(&pts, line)?;
    let difficulty = tokens[9].text.parse::<u8>().map_err(|_| DotaError::Parse {
        line,
        column: tokens[9].column,
        message: format!("expected a small non-negative integer difficulty, found '{}'", tokens[9].text),
    })?;
    let score = if with_score { parse_num(&tokens[10], line, "score")? } else { 1.0 };
    let annotation = Annotation {
        quad: sort_corners(pts),
        category: tokens[8].text.to_string(),
        difficulty,
        line,
    };
    Ok((annotation, score))
}

fn parse_lines<R: BufRead>(reader: R, with_score: bool) -> Result<Vec<(Annotation, f64)>, DotaError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let tokens = tokenize(&line);
        if is_skipped(&tokens) {
            continue;
        }
        out.push(parse_record(&tokens, i + 1, with_score, line.chars().count())?);
    }
    Ok(out)
}

/// Parse ground-truth annotations.
pub fn parse_dota<R: BufRead>(reader: R) -> Result<Vec<Annotation>, DotaError> {
    Ok(parse_lines(reader, false)?.into_iter().map(|(a, _)| a).collect())
}

/// Parse scored predictions (ground-truth schema plus a score column).
pub fn parse_detections<R: BufRead>(reader: R) -> Result<Vec<Detection>, DotaError> {
    Ok(parse_lines(reader, true)?
        .into_iter()
        .map(|(annotation, score)| Detection { annotation, score })
        .collect())
}

/// What to do with quads that are not rectangles.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum QuadPolicy {
    #[default]
    Reject,
    /// Keep raw quads; only FPDIoU can consume them.
    KeepQuads,
}

/// Rectangles recovered from annotations, with the indices of the ones that
/// were not rectangles.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Rectified {
    /// `(annotation index, box)` in input order.
    pub boxes: Vec<(usize, RotatedBox)>,
    pub rejected: Vec<usize>,
}

pub fn rectify(annotations: &[Annotation]) -> Rectified {
    let mut out = Rectified::default();
    for (i, a) in annotations.iter().enumerate() {
        match a.to_box() {
            Ok(b) => out.boxes.push((i, b)),
            Err(_) => out.rejected.push(i),
        }
    }
    out
}
