//! Subcarrier selection: which OFDM bins the surface should reflect.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SelectionError {
    #[error("selection size {size} out of range for K = {k}")]
    SizeOutOfRange { size: usize, k: usize },
    #[error("no admissible reference index for a fixed window of {size} bins in K = {k}")]
    EmptyReferenceRange { size: usize, k: usize },
    #[error("{size} non-consecutive bins do not fit in K = {k} (at most {max})")]
    TooManyNonConsecutive { size: usize, k: usize, max: usize },
    #[error("empty selection")]
    Empty,
    #[error("bin index {index} outside [0, {k})")]
    IndexOutOfRange { index: usize, k: usize },
    #[error("bin indices must be strictly increasing")]
    Unsorted,
    #[error("unknown selection method `{0}`")]
    UnknownMethod(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMethod {
    /// Window around a uniformly drawn reference bin, clipped at the band edges.
    Adjacent,
    /// Window whose reference bin is drawn so that it never touches the edges.
    FixedAdjacent,
    /// Uniform over all sets without consecutive bins.
    Random,
    /// Caller-supplied index set.
    Explicit,
}

impl SelectionMethod {
    pub const SWEEPABLE: [SelectionMethod; 3] = [
        SelectionMethod::Adjacent,
        SelectionMethod::FixedAdjacent,
        SelectionMethod::Random,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SelectionMethod::Adjacent => "adjacent",
            SelectionMethod::FixedAdjacent => "fixed_adjacent",
            SelectionMethod::Random => "random",
            SelectionMethod::Explicit => "explicit",
        }
    }

    /// Draws a selection of `size` bins out of `k` with this method.
    pub fn draw<R: Rng + ?Sized>(
        self,
        rng: &mut R,
        size: usize,
        k: usize,
    ) -> Result<SelectionSet, SelectionError> {
        match self {
            SelectionMethod::Adjacent => adjacent(rng, size, k),
            SelectionMethod::FixedAdjacent => fixed_adjacent(rng, size, k),
            SelectionMethod::Random => random_nonconsecutive(rng, size, k),
            SelectionMethod::Explicit => Err(SelectionError::UnknownMethod("explicit".into())),
        }
    }
}

impl fmt::Display for SelectionMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SelectionMethod {
    type Err = SelectionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "adjacent" => Ok(SelectionMethod::Adjacent),
            "fixed_adjacent" => Ok(SelectionMethod::FixedAdjacent),
            "random" => Ok(SelectionMethod::Random),
            _ => Err(SelectionError::UnknownMethod(s.to_string())),
        }
    }
}

/// The selected bin set `I`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectionSet {
    indices: Vec<usize>,
    method: SelectionMethod,
    reference: Option<usize>,
    requested_size: usize,
}

impl SelectionSet {
    /// Wraps an explicit bin list. Indices must be strictly increasing and below `k`.
    pub fn from_indices(indices: Vec<usize>, k: usize) -> Result<Self, SelectionError> {
        if indices.is_empty() {
            return Err(SelectionError::Empty);
        }
        if let Some(&index) = indices.iter().find(|&&i| i >= k) {
            return Err(SelectionError::IndexOutOfRange { index, k });
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(SelectionError::Unsorted);
        }
        let requested_size = indices.len();
        Ok(SelectionSet {
            indices,
            method: SelectionMethod::Explicit,
            reference: None,
            requested_size,
        })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    /// `|I|`, the number of bins actually selected.
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn method(&self) -> SelectionMethod {
        self.method
    }

    /// Reference bin `j` for the window methods.
    pub fn reference(&self) -> Option<usize> {
        self.reference
    }

    pub fn requested_size(&self) -> usize {
        self.requested_size
    }

    pub fn contains(&self, bin: usize) -> bool {
        self.indices.binary_search(&bin).is_ok()
    }
}

/// Bins left and right of the reference for a window of `size` bins.
///
/// Odd sizes are symmetric. Even sizes keep one bin fewer on the right so the
/// window holds exactly `size` bins.
fn window_extent(size: usize) -> (usize, usize) {
    let left = size / 2;
    (left, size - 1 - left)
}

/// Window of `size` bins around `reference`, clipped to `[0, k)`.
pub fn adjacent_window(reference: usize, size: usize, k: usize) -> Result<SelectionSet, SelectionError> {
    if size == 0 || size > k {
        return Err(SelectionError::SizeOutOfRange { size, k });
    }
    if reference >= k {
        return Err(SelectionError::IndexOutOfRange { index: reference, k });
    }
    let (left, right) = window_extent(size);
    let lo = reference.saturating_sub(left);
    let hi = (reference + right).min(k - 1);
    Ok(SelectionSet {
        indices: (lo..=hi).collect(),
        method: SelectionMethod::Adjacent,
        reference: Some(reference),
        requested_size: size,
    })
}

/// Uniform index in `0..n` from a single uniform real draw.
///
/// Both window methods map the same draw through this function, so under a
/// shared random stream their reference bins stay monotonically coupled.
fn draw_index<R: Rng + ?Sized>(rng: &mut R, n: usize) -> usize {
    let u: f64 = rng.random();
    ((u * n as f64) as usize).min(n - 1)
}

pub fn adjacent<R: Rng + ?Sized>(rng: &mut R, size: usize, k: usize) -> Result<SelectionSet, SelectionError> {
    if size == 0 || size > k {
        return Err(SelectionError::SizeOutOfRange { size, k });
    }
    let reference = draw_index(rng, k);
    adjacent_window(reference, size, k)
}

/// Admissible reference bins for an unclipped window of `size` bins.
pub fn fixed_reference_range(size: usize, k: usize) -> Result<(usize, usize), SelectionError> {
    if size == 0 || size > k {
        return Err(SelectionError::SizeOutOfRange { size, k });
    }
    let (left, right) = window_extent(size);
    if left + right >= k {
        return Err(SelectionError::EmptyReferenceRange { size, k });
    }
    Ok((left, k - 1 - right))
}

pub fn fixed_adjacent_at(reference: usize, size: usize, k: usize) -> Result<SelectionSet, SelectionError> {
    let (lo, hi) = fixed_reference_range(size, k)?;
    if reference < lo || reference > hi {
        return Err(SelectionError::IndexOutOfRange { index: reference, k });
    }
    let mut sel = adjacent_window(reference, size, k)?;
    sel.method = SelectionMethod::FixedAdjacent;
    Ok(sel)
}

pub fn fixed_adjacent<R: Rng + ?Sized>(rng: &mut R, size: usize, k: usize) -> Result<SelectionSet, SelectionError> {
    let (lo, hi) = fixed_reference_range(size, k)?;
    let reference = lo + draw_index(rng, hi - lo + 1);
    fixed_adjacent_at(reference, size, k)
}

/// Largest non-consecutive set that fits in `k` bins.
pub fn max_nonconsecutive(k: usize) -> usize {
    k.div_ceil(2)
}

/// Maps a strictly increasing combination of `0..=k-size` onto a
/// non-consecutive set by spreading the t-th element by `t`.
pub fn spread_combination(combination: &[usize]) -> Vec<usize> {
    combination.iter().enumerate().map(|(t, &c)| c + t).collect()
}

pub fn random_nonconsecutive<R: Rng + ?Sized>(
    rng: &mut R,
    size: usize,
    k: usize,
) -> Result<SelectionSet, SelectionError> {
    if size == 0 || size > k {
        return Err(SelectionError::SizeOutOfRange { size, k });
    }
    let max = max_nonconsecutive(k);
    if size > max {
        return Err(SelectionError::TooManyNonConsecutive { size, k, max });
    }
    let mut combination = rand::seq::index::sample(rng, k - size + 1, size).into_vec();
    combination.sort_unstable();
    Ok(SelectionSet {
        indices: spread_combination(&combination),
        method: SelectionMethod::Random,
        reference: None,
        requested_size: size,
    })
}

/// Binary selector `b`: one on selected bins, zero elsewhere.
pub fn selector_vector(sel: &SelectionSet, k: usize) -> Result<Vec<f64>, SelectionError> {
    if sel.is_empty() {
        return Err(SelectionError::Empty);
    }
    let mut b = vec![0.0; k];
    for &i in sel.indices() {
        if i >= k {
            return Err(SelectionError::IndexOutOfRange { index: i, k });
        }
        b[i] = 1.0;
    }
    Ok(b)
}
