//! Loss (de)serialization. Built-ins store just their construction
//! parameters; composites store the full segment table. Interval bounds are
//! decimal strings so infinities survive the trip; numeric parameters are
//! JSON numbers, which round-trip bit-identically.

use super::{make_exponential, make_figure_poly, make_logistic, make_poly_tail};
use super::{Loss, LossKind, Piece, Segment, Tail};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Serialize, Deserialize)]
struct SegmentJson {
    lo: String,
    hi: String,
    #[serde(flatten)]
    piece: Piece,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
enum LossJson {
    Exponential { params: ExpParams },
    Logistic { params: NoParams },
    PolyTail { params: ExpParams },
    FigurePoly { params: PolyParams },
    Composite(CompositeJson),
}

#[derive(Serialize, Deserialize)]
struct ExpParams {
    a: f64,
    b: f64,
}

#[derive(Serialize, Deserialize)]
struct NoParams {}

#[derive(Serialize, Deserialize)]
struct PolyParams {
    p: f64,
}

#[derive(Serialize, Deserialize)]
struct CompositeJson {
    name: String,
    smoothness: String,
    tail: Tail,
    segments: Vec<SegmentJson>,
}

fn bound(v: f64) -> String {
    format!("{v:?}")
}

fn parse_bound(s: &str) -> Result<f64> {
    s.parse::<f64>()
        .map_err(|_| Error::Parameter(format!("unparseable interval bound {s:?}")))
}

pub(super) fn to_json(loss: &Loss) -> String {
    let doc = match loss.kind {
        LossKind::Exponential { a, b } => LossJson::Exponential {
            params: ExpParams { a, b },
        },
        LossKind::Logistic => LossJson::Logistic { params: NoParams {} },
        LossKind::PolyTail { a, b } => LossJson::PolyTail {
            params: ExpParams { a, b },
        },
        LossKind::FigurePoly { p } => LossJson::FigurePoly {
            params: PolyParams { p },
        },
        LossKind::Composite => LossJson::Composite(CompositeJson {
            name: loss.name.clone(),
            smoothness: bound(loss.smoothness),
            tail: loss.tail,
            segments: loss
                .segments
                .iter()
                .map(|s| SegmentJson {
                    lo: bound(s.lo),
                    hi: bound(s.hi),
                    piece: s.piece.clone(),
                })
                .collect(),
        }),
    };
    serde_json::to_string_pretty(&doc).expect("loss serialization cannot fail")
}

pub(super) fn from_json(text: &str) -> Result<Loss> {
    let doc: LossJson = serde_json::from_str(text)?;
    match doc {
        LossJson::Exponential { params } => make_exponential(params.a, params.b),
        LossJson::Logistic { .. } => Ok(make_logistic()),
        LossJson::PolyTail { params } => make_poly_tail(params.a, params.b),
        LossJson::FigurePoly { params } => make_figure_poly(params.p),
        LossJson::Composite(c) => {
            if c.segments.is_empty() {
                return Err(Error::Parameter("composite loss with no segments".into()));
            }
            let mut segments = Vec::with_capacity(c.segments.len());
            for s in &c.segments {
                segments.push(Segment {
                    lo: parse_bound(&s.lo)?,
                    hi: parse_bound(&s.hi)?,
                    piece: s.piece.clone(),
                });
            }
            for pair in segments.windows(2) {
                if pair[0].hi != pair[1].lo {
                    return Err(Error::Parameter(format!(
                        "composite segments are not contiguous at {}",
                        pair[0].hi
                    )));
                }
                if !(pair[0].lo < pair[0].hi) {
                    return Err(Error::Parameter(format!(
                        "degenerate segment [{}, {}]",
                        pair[0].lo, pair[0].hi
                    )));
                }
            }
            Ok(Loss::from_segments(
                c.name,
                LossKind::Composite,
                segments,
                parse_bound(&c.smoothness)?,
                c.tail,
            ))
        }
    }
}
