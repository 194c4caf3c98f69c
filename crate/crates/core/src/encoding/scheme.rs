use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How an input is combined with its anchor(s) before it reaches a model.
///
/// | scheme          | tuple                         | decode              |
/// |-----------------|-------------------------------|---------------------|
/// | `Identity`      | `[R ‖ X]`                     | `X`                 |
/// | `SingleAnchor`  | `[R ‖ X − R]`                 | `R + Δ`             |
/// | `DoubleAnchor`  | `[R₁ ‖ R₂ ‖ X − R₁ − R₂]`     | `R₁ + R₂ + Δ`       |
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EncodingScheme {
    /// The anchor is a pure distractor.
    Identity,
    #[default]
    SingleAnchor,
    DoubleAnchor,
}

impl EncodingScheme {
    pub const ALL: [EncodingScheme; 3] = [
        EncodingScheme::Identity,
        EncodingScheme::SingleAnchor,
        EncodingScheme::DoubleAnchor,
    ];

    /// Number of anchors consumed per tuple.
    pub fn anchors_per_input(self) -> usize {
        match self {
            EncodingScheme::DoubleAnchor => 2,
            _ => 1,
        }
    }

    /// Width of the tuple fed to a model for `d`-dimensional inputs.
    pub fn tuple_dim(self, d: usize) -> usize {
        (self.anchors_per_input() + 1) * d
    }

    pub fn name(self) -> &'static str {
        match self {
            EncodingScheme::Identity => "identity",
            EncodingScheme::SingleAnchor => "single-anchor",
            EncodingScheme::DoubleAnchor => "double-anchor",
        }
    }

    /// Writes `[anchors ‖ encoded]` for `x` into `out`.
    ///
    /// Callers guarantee `anchors.len() == anchors_per_input()`, that every
    /// anchor has `x.len()` coordinates and that `out` has `tuple_dim` slots.
    pub(crate) fn write_tuple(self, x: &[f64], anchors: &[&[f64]], out: &mut [f64]) {
        let d = x.len();
        debug_assert_eq!(anchors.len(), self.anchors_per_input());
        debug_assert_eq!(out.len(), self.tuple_dim(d));
        for (slot, anchor) in out.chunks_exact_mut(d).zip(anchors) {
            slot.copy_from_slice(anchor);
        }
        let encoded = &mut out[self.anchors_per_input() * d..];
        match self {
            EncodingScheme::Identity => encoded.copy_from_slice(x),
            EncodingScheme::SingleAnchor => {
                for ((e, &xi), &ri) in encoded.iter_mut().zip(x).zip(anchors[0]) {
                    *e = xi - ri;
                }
            }
            EncodingScheme::DoubleAnchor => {
                for (i, e) in encoded.iter_mut().enumerate() {
                    *e = x[i] - anchors[0][i] - anchors[1][i];
                }
            }
        }
    }
}

impl std::fmt::Display for EncodingScheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// The tuple `(R, Δ(X, R))` presented to a Δ-model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchoredInput {
    pub anchor: Vec<f64>,
    /// Present only for [`EncodingScheme::DoubleAnchor`].
    pub second_anchor: Option<Vec<f64>>,
    pub encoded: Vec<f64>,
}

impl AnchoredInput {
    pub fn dim(&self) -> usize {
        self.encoded.len()
    }

    /// Flattens to the model input layout `[anchor ‖ (second_anchor ‖) encoded]`.
    pub fn to_tuple(&self) -> Vec<f64> {
        let mut out = self.anchor.clone();
        if let Some(second) = &self.second_anchor {
            out.extend_from_slice(second);
        }
        out.extend_from_slice(&self.encoded);
        out
    }

    /// Splits a flat tuple back into its parts.
    pub fn from_tuple(tuple: &[f64], scheme: EncodingScheme) -> Result<Self> {
        let parts = scheme.anchors_per_input() + 1;
        if tuple.is_empty() || !tuple.len().is_multiple_of(parts) {
            return Err(Error::invalid(format!(
                "a {scheme} tuple needs a positive multiple of {parts} values, got {}",
                tuple.len()
            )));
        }
        let d = tuple.len() / parts;
        let mut chunks = tuple.chunks_exact(d).map(<[f64]>::to_vec);
        let anchor = chunks.next().unwrap_or_default();
        let second_anchor = (parts == 3).then(|| chunks.next().unwrap_or_default());
        let encoded = chunks.next().unwrap_or_default();
        Ok(AnchoredInput {
            anchor,
            second_anchor,
            encoded,
        })
    }
}

/// Encodes `x` against each anchor (each consecutive pair for `DoubleAnchor`).
pub fn encode(x: &[f64], anchors: &[Vec<f64>], scheme: EncodingScheme) -> Result<Vec<AnchoredInput>> {
    if anchors.is_empty() {
        return Err(Error::Empty("anchor list".into()));
    }
    if x.is_empty() {
        return Err(Error::Empty("input vector".into()));
    }
    for (i, anchor) in anchors.iter().enumerate() {
        if anchor.len() != x.len() {
            return Err(Error::dims(format!("anchor {i}"), x.len(), anchor.len()));
        }
    }
    let per = scheme.anchors_per_input();
    if !anchors.len().is_multiple_of(per) {
        return Err(Error::invalid(format!(
            "{scheme} consumes anchors pairwise; got an odd count ({})",
            anchors.len()
        )));
    }
    let d = x.len();
    let mut buf = vec![0.0; scheme.tuple_dim(d)];
    Ok(anchors
        .chunks_exact(per)
        .map(|group| {
            let refs: Vec<&[f64]> = group.iter().map(Vec::as_slice).collect();
            scheme.write_tuple(x, &refs, &mut buf);
            AnchoredInput {
                anchor: group[0].clone(),
                second_anchor: (per == 2).then(|| group[1].clone()),
                encoded: buf[per * d..].to_vec(),
            }
        })
        .collect())
}

/// Recovers the original input from a tuple.
pub fn decode(a: &AnchoredInput, scheme: EncodingScheme) -> Result<Vec<f64>> {
    let d = a.encoded.len();
    if a.anchor.len() != d {
        return Err(Error::dims("anchor", d, a.anchor.len()));
    }
    match (scheme, &a.second_anchor) {
        (EncodingScheme::Identity, _) => Ok(a.encoded.clone()),
        (EncodingScheme::SingleAnchor, _) => Ok(a.anchor.iter().zip(&a.encoded).map(|(r, e)| r + e).collect()),
        (EncodingScheme::DoubleAnchor, Some(second)) => {
            if second.len() != d {
                return Err(Error::dims("second anchor", d, second.len()));
            }
            // Undo the subtractions in reverse order.
            Ok((0..d).map(|i| (a.encoded[i] + second[i]) + a.anchor[i]).collect())
        }
        (EncodingScheme::DoubleAnchor, None) => Err(Error::invalid("double-anchor tuple is missing its second anchor")),
    }
}
