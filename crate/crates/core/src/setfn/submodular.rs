use crate::error::{Error, Result};

/// Largest ground set accepted by [`is_submodular_bruteforce`].
pub const MAX_BRUTEFORCE_ELEMENTS: usize = 14;

/// A violation of diminishing returns: adding `element` to `x` gains less
/// than adding it to the superset `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubmodularityWitness {
    /// Subset bitmask, bit `k` set when element `k` is present.
    pub x: u64,
    pub y: u64,
    pub element: usize,
    pub gain_at_x: f64,
    pub gain_at_y: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubmodularityCheck {
    pub witness: Option<SubmodularityWitness>,
}

impl SubmodularityCheck {
    pub fn is_submodular(&self) -> bool {
        self.witness.is_none()
    }
}

/// Expands a bitmask into an indicator of length `n`.
pub fn mask_to_indicator(mask: u64, n: usize) -> Vec<bool> {
    (0..n).map(|k| mask >> k & 1 == 1).collect()
}

/// Exhaustive diminishing-returns test for a set function on `n` elements.
///
/// Tabulates `f` on all `2^n` subsets and checks
/// `f(S + v) - f(S) >= f(S + w + v) - f(S + w) - tol` for every `S` and
/// distinct `v, w` outside `S`. This pairwise condition is equivalent to the
/// full `X ⊆ Y` definition; a failure is reported as `(X = S, Y = S + w, v)`.
pub fn is_submodular_bruteforce<F>(n: usize, f: F, tol: f64) -> Result<SubmodularityCheck>
where
    F: Fn(&[bool]) -> f64,
{
    if n > MAX_BRUTEFORCE_ELEMENTS {
        return Err(Error::TooLarge {
            what: "brute-force submodularity check",
            size: n as f64,
            limit: MAX_BRUTEFORCE_ELEMENTS as f64,
        });
    }
    let table: Vec<f64> = (0..1u64 << n).map(|m| f(&mask_to_indicator(m, n))).collect();
    for s in 0..1u64 << n {
        for v in 0..n {
            if s >> v & 1 == 1 {
                continue;
            }
            let gain_x = table[(s | 1 << v) as usize] - table[s as usize];
            for w in 0..n {
                if w == v || s >> w & 1 == 1 {
                    continue;
                }
                let y = s | 1 << w;
                let gain_y = table[(y | 1 << v) as usize] - table[y as usize];
                if gain_x < gain_y - tol {
                    return Ok(SubmodularityCheck {
                        witness: Some(SubmodularityWitness {
                            x: s,
                            y,
                            element: v,
                            gain_at_x: gain_x,
                            gain_at_y: gain_y,
                        }),
                    });
                }
            }
        }
    }
    Ok(SubmodularityCheck { witness: None })
}

/// Dense quadratic set function `X -> 1_X^T A 1_X`.
#[derive(Debug, Clone)]
pub struct QuadraticSetFunction {
    n: usize,
    a: Vec<f64>,
}

impl QuadraticSetFunction {
    /// `a` is row-major `n x n`.
    pub fn new(n: usize, a: Vec<f64>) -> Result<Self> {
        if a.len() != n * n {
            return Err(Error::Dimension {
                axis: "quadratic matrix entries",
                expected: n * n,
                found: a.len(),
            });
        }
        Ok(QuadraticSetFunction { n, a })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn eval(&self, ind: &[bool]) -> f64 {
        let on: Vec<usize> = (0..self.n).filter(|&k| ind[k]).collect();
        let mut acc = 0.0;
        for &i in &on {
            for &j in &on {
                acc += self.a[i * self.n + j];
            }
        }
        acc
    }

    /// The algebraic criterion: submodular iff every off-diagonal entry of
    /// the symmetrized matrix is non-positive.
    pub fn has_nonpositive_off_diagonal(&self) -> bool {
        (0..self.n).all(|i| {
            (0..self.n).all(|j| i == j || self.a[i * self.n + j] + self.a[j * self.n + i] <= 0.0)
        })
    }
}
