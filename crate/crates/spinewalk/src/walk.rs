//! Łukasiewicz paths and height processes.
//!
//! A downward skip-free integer walk encodes an ordered forest: step
//! `offspring − 1` per vertex in depth-first order. The height of the k-th
//! visited vertex is recovered from the walk alone by
//!
//! ```text
//! h(i) = #{ j < i : x(j) = min{ x(k) : j <= k <= i } }
//! ```
//!
//! which we compute in amortized O(1) per vertex with a stack of weak
//! running-minimum records. The brute-force evaluation of the formula is
//! kept in test code as the oracle.

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum WalkError {
    #[error("step {step} at index {index} is below -1 (not downward skip-free)")]
    SkipFree { index: usize, step: i64 },
    #[error("partial sums overflowed i64 at index {index}")]
    Overflow { index: usize },
    #[error("values must start at the stated origin, got {got}")]
    BadOrigin { got: i64 },
}

/// An integer-valued downward skip-free walk, stored as its running values
/// `S(0), ..., S(n)`. Walks built from degree sequences start at 0; the
/// future-infimum transform produces walks with a nonnegative start.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Path {
    values: Vec<i64>,
}

impl Path {
    /// Build from steps, with `S(0) = 0`. Each step must be ≥ −1.
    pub fn from_steps(steps: &[i64]) -> Result<Self, WalkError> {
        let mut values = Vec::with_capacity(steps.len() + 1);
        values.push(0i64);
        let mut acc = 0i64;
        for (i, &s) in steps.iter().enumerate() {
            if s < -1 {
                return Err(WalkError::SkipFree { index: i, step: s });
            }
            acc = acc.checked_add(s).ok_or(WalkError::Overflow { index: i })?;
            values.push(acc);
        }
        Ok(Path { values })
    }

    /// Build from explicit values; increments must be ≥ −1.
    pub fn from_values(values: Vec<i64>) -> Result<Self, WalkError> {
        for i in 1..values.len() {
            let s = values[i] - values[i - 1];
            if s < -1 {
                return Err(WalkError::SkipFree { index: i - 1, step: s });
            }
        }
        Ok(Path { values })
    }

    /// Number of steps (one per visited vertex). `values` has one more entry.
    pub fn len(&self) -> usize {
        self.values.len().saturating_sub(1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn values(&self) -> &[i64] {
        &self.values
    }

    pub fn step(&self, i: usize) -> i64 {
        self.values[i + 1] - self.values[i]
    }

    pub fn steps(&self) -> impl Iterator<Item = i64> + '_ {
        self.values.windows(2).map(|w| w[1] - w[0])
    }
}

/// Heights of visited vertices, one entry per step of the walk.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct HeightSeq(pub Vec<u64>);

impl HeightSeq {
    pub fn as_slice(&self) -> &[u64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Łukasiewicz path of a forest given child counts in depth-first order.
pub fn lukasiewicz_from_degrees(degrees: &[u64]) -> Result<Path, WalkError> {
    let mut values = Vec::with_capacity(degrees.len() + 1);
    values.push(0i64);
    let mut acc = 0i64;
    for (i, &d) in degrees.iter().enumerate() {
        let step = i64::try_from(d)
            .ok()
            .and_then(|d| d.checked_sub(1))
            .ok_or(WalkError::Overflow { index: i })?;
        acc = acc.checked_add(step).ok_or(WalkError::Overflow { index: i })?;
        values.push(acc);
    }
    Ok(Path { values })
}

/// Incremental height computation: feed walk values left to right.
///
/// After `push(S(i+1))` the tracker holds the candidate set for index
/// `i+1`; `height()` before the push is `h(i)`. The stack stores the
/// values `S(j)` of indices `j` that are weak minima over `(j, current]`,
/// in weakly increasing order.
#[derive(Clone, Debug, Default)]
pub struct HeightTracker {
    stack: Vec<i64>,
    last: Option<i64>,
}

impl HeightTracker {
    pub fn new() -> Self {
        Self::default()
    }

    /// `h(i)` once `S(0..=i)` has been pushed.
    pub fn height(&self) -> u64 {
        self.stack.len() as u64
    }

    /// Push the next walk value `S(i)`.
    pub fn push(&mut self, value: i64) {
        if let Some(prev) = self.last {
            self.stack.push(prev);
            while self.stack.last().map_or(false, |&top| top > value) {
                self.stack.pop();
            }
        }
        self.last = Some(value);
    }
}

/// Height process of a walk, per the running-minimum count formula.
/// Returns one height per step; an empty walk yields an empty sequence.
pub fn height_process(path: &Path) -> HeightSeq {
    let v = path.values();
    if v.len() <= 1 {
        return HeightSeq(Vec::new());
    }
    let n = v.len() - 1;
    let mut heights = Vec::with_capacity(n);
    // stack holds S(j) for the candidate set of the next index
    let mut stack: Vec<i64> = Vec::new();
    for i in 0..n {
        heights.push(stack.len() as u64);
        stack.push(v[i]);
        let next = v[i + 1];
        while stack.last().map_or(false, |&top| top > next) {
            stack.pop();
        }
    }
    HeightSeq(heights)
}

/// `X − X̲̲` where `X̲̲(k) = min{X(m) : m ≥ k}` over the given window.
/// The result is pointwise ≥ 0, ends at 0, and has the same height process
/// as the input.
pub fn future_infimum_transform(path: &Path) -> Path {
    let v = path.values();
    if v.is_empty() {
        return Path { values: Vec::new() };
    }
    let mut out = vec![0i64; v.len()];
    let mut min = i64::MAX;
    for k in (0..v.len()).rev() {
        min = min.min(v[k]);
        out[k] = v[k] - min;
    }
    Path { values: out }
}

/// CSV dump of a path and its height process: `index,s,h` (the final row
/// has an empty height column since `h` has one fewer entry).
pub fn path_csv(path: &Path, heights: &HeightSeq) -> String {
    let mut out = String::from("index,s,h\n");
    let v = path.values();
    for (i, &s) in v.iter().enumerate() {
        if i < heights.len() {
            out.push_str(&format!("{i},{s},{}\n", heights.0[i]));
        } else {
            out.push_str(&format!("{i},{s},\n"));
        }
    }
    out
}

#[cfg(test)]
pub(crate) fn height_bruteforce(path: &Path) -> HeightSeq {
    let v = path.values();
    if v.len() <= 1 {
        return HeightSeq(Vec::new());
    }
    let n = v.len() - 1;
    let mut hs = Vec::with_capacity(n);
    for i in 0..n {
        let mut count = 0u64;
        for j in 0..i {
            let min = (j..=i).map(|k| v[k]).min().unwrap();
            if v[j] == min {
                count += 1;
            }
        }
        hs.push(count);
    }
    HeightSeq(hs)
}
