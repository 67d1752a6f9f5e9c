//! Length-L sequences of length-q real sections.
//!
//! The same container carries the true one-hot message vector s, the AMP
//! effective observation r, and per-section belief/pmf vectors, so all of
//! them share one flat layout: section `l` occupies `data[l*q .. (l+1)*q]`.

/// L sections of q reals, stored contiguously.
#[derive(Debug, Clone, PartialEq)]
pub struct SectionalVector {
    sections: usize,
    width: usize,
    data: Vec<f64>,
}

impl SectionalVector {
    pub fn zeros(sections: usize, width: usize) -> Self {
        Self { sections, width, data: vec![0.0; sections * width] }
    }

    /// Every section set to the uniform pmf 1/q.
    pub fn uniform(sections: usize, width: usize) -> Self {
        Self { sections, width, data: vec![1.0 / width as f64; sections * width] }
    }

    /// One-hot encoding of a symbol sequence: section `l` is the standard
    /// basis vector selected by `symbols[l]`.
    pub fn one_hot(symbols: &[u16], width: usize) -> Self {
        let mut v = Self::zeros(symbols.len(), width);
        for (l, &sym) in symbols.iter().enumerate() {
            debug_assert!((sym as usize) < width);
            v.data[l * width + sym as usize] = 1.0;
        }
        v
    }

    pub fn from_data(sections: usize, width: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), sections * width, "geometry/data mismatch");
        Self { sections, width, data }
    }

    pub fn sections(&self) -> usize {
        self.sections
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn section(&self, l: usize) -> &[f64] {
        &self.data[l * self.width..(l + 1) * self.width]
    }

    #[inline]
    pub fn section_mut(&mut self, l: usize) -> &mut [f64] {
        &mut self.data[l * self.width..(l + 1) * self.width]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn norm2_sq(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum()
    }

    pub fn l1_norm(&self) -> f64 {
        self.data.iter().map(|x| x.abs()).sum()
    }

    /// self += a * x
    pub fn axpy(&mut self, a: f64, x: &Self) {
        assert_eq!(self.data.len(), x.data.len());
        for (s, v) in self.data.iter_mut().zip(&x.data) {
            *s += a * v;
        }
    }

    pub fn scale(&mut self, a: f64) {
        for s in self.data.iter_mut() {
            *s *= a;
        }
    }

    /// Per-section argmax, ties broken toward the lowest index.
    pub fn argmax_symbols(&self) -> Vec<u16> {
        (0..self.sections)
            .map(|l| {
                let sec = self.section(l);
                let mut best = 0usize;
                for (i, &x) in sec.iter().enumerate().skip(1) {
                    if x > sec[best] {
                        best = i;
                    }
                }
                best as u16
            })
            .collect()
    }

    /// Largest deviation of any section mass from 1, for pmf invariants.
    pub fn max_pmf_deviation(&self) -> f64 {
        (0..self.sections)
            .map(|l| (self.section(l).iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// True when every section is a nonnegative vector summing to 1 within `tol`.
    pub fn is_valid_pmfs(&self, tol: f64) -> bool {
        self.data.iter().all(|&x| x >= 0.0 && x.is_finite()) && self.max_pmf_deviation() <= tol
    }
}
