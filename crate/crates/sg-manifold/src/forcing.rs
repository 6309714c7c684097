//! ε-analytic forcing families F(ε, x) = Σ_N F_N(x) ε^N with F_0 = F_1 = 0.
//!
//! Coefficients are normalized Taylor profiles. Built-in families cover the
//! experiments; tabulated per-order profiles can be loaded from CSV.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid1D, GridFn1D};
use crate::norm::weighted_norm_1d_slice;
use std::sync::Arc;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "profile", rename_all = "lowercase")]
pub enum Profile {
    /// amplitude · exp(−(x−x0)²/(2σ²))
    Gaussian { amplitude: f64, x0: f64, sigma: f64 },
    /// amplitude · sech²(x)
    Sech2 { amplitude: f64 },
}

impl Profile {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Profile::Gaussian {
                amplitude,
                x0,
                sigma,
            } => amplitude * (-(x - x0) * (x - x0) / (2.0 * sigma * sigma)).exp(),
            Profile::Sech2 { amplitude } => {
                let s = 1.0 / x.cosh();
                amplitude * s * s
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ForcingTerm {
    pub order: usize,
    #[serde(flatten)]
    pub shape: Profile,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum ForcingFamily {
    /// F ≡ 0: the classical solitary manifold.
    Zero,
    /// Single ε²-order profile.
    Gaussian {
        amplitude: f64,
        x0: f64,
        sigma: f64,
    },
    Sech2 {
        amplitude: f64,
    },
    /// Finite ε-polynomial with one profile per listed order.
    Poly {
        terms: Vec<ForcingTerm>,
    },
    /// Per-order samples on a stored x-axis; interpolated onto target grids.
    Tabulated {
        xs: Vec<f64>,
        orders: Vec<usize>,
        profiles: Vec<Vec<f64>>,
    },
}

impl ForcingFamily {
    /// Reject families that violate F(0) = ∂εF(0) = 0 or carry bad shapes.
    pub fn validate(&self) -> Result<()> {
        match self {
            ForcingFamily::Zero | ForcingFamily::Gaussian { .. } | ForcingFamily::Sech2 { .. } => {
                Ok(())
            }
            ForcingFamily::Poly { terms } => {
                for t in terms {
                    if t.order < 2 {
                        return Err(Error::Config(format!(
                            "forcing term of order {} violates F(0) = dF/de(0) = 0",
                            t.order
                        )));
                    }
                }
                Ok(())
            }
            ForcingFamily::Tabulated {
                xs,
                orders,
                profiles,
            } => {
                if orders.len() != profiles.len() {
                    return Err(Error::Config(
                        "tabulated forcing: orders and profiles count differ".into(),
                    ));
                }
                if orders.iter().any(|&o| o < 2) {
                    return Err(Error::Config(
                        "tabulated forcing carries an order < 2 profile".into(),
                    ));
                }
                if profiles.iter().any(|p| p.len() != xs.len()) {
                    return Err(Error::Config(
                        "tabulated forcing: profile length differs from x-axis".into(),
                    ));
                }
                if xs.len() < 8 {
                    return Err(Error::Config("tabulated forcing: x-axis too short".into()));
                }
                Ok(())
            }
        }
    }

    /// Normalized Taylor coefficient F_N evaluated at one point.
    pub fn coeff_at(&self, n: usize, x: f64) -> f64 {
        match self {
            ForcingFamily::Zero => 0.0,
            ForcingFamily::Gaussian {
                amplitude,
                x0,
                sigma,
            } => {
                if n == 2 {
                    Profile::Gaussian {
                        amplitude: *amplitude,
                        x0: *x0,
                        sigma: *sigma,
                    }
                    .eval(x)
                } else {
                    0.0
                }
            }
            ForcingFamily::Sech2 { amplitude } => {
                if n == 2 {
                    Profile::Sech2 {
                        amplitude: *amplitude,
                    }
                    .eval(x)
                } else {
                    0.0
                }
            }
            ForcingFamily::Poly { terms } => terms
                .iter()
                .filter(|t| t.order == n)
                .map(|t| t.shape.eval(x))
                .sum(),
            ForcingFamily::Tabulated {
                xs,
                orders,
                profiles,
            } => orders
                .iter()
                .zip(profiles)
                .filter(|(&o, _)| o == n)
                .map(|(_, p)| interp_cubic(xs, p, x))
                .sum(),
        }
    }

    /// Sampled coefficient profile on a grid.
    pub fn coeff_profile(&self, n: usize, xgrid: &Grid1D) -> Vec<f64> {
        xgrid.nodes().iter().map(|&x| self.coeff_at(n, x)).collect()
    }

    /// F(ε, x) summed through `order`.
    pub fn eval(&self, eps: f64, x: f64, order: usize) -> f64 {
        let mut acc = 0.0;
        let mut p = 1.0;
        for n in 0..=order {
            if n >= 2 {
                acc += self.coeff_at(n, x) * p;
            }
            p *= eps;
        }
        acc
    }

    /// Largest order with a nonzero stored profile (0 for zero forcing).
    pub fn max_order(&self) -> usize {
        match self {
            ForcingFamily::Zero => 0,
            ForcingFamily::Gaussian { .. } | ForcingFamily::Sech2 { .. } => 2,
            ForcingFamily::Poly { terms } => terms.iter().map(|t| t.order).max().unwrap_or(0),
            ForcingFamily::Tabulated { orders, .. } => orders.iter().copied().max().unwrap_or(0),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, ForcingFamily::Zero)
    }

    /// Smallest c with ‖F_N‖_{H^{0,α}} ≤ c^N (N−2)! across stored orders:
    /// growth diagnostic against the assumed analyticity envelope.
    pub fn growth_constant(&self, xgrid: &Grid1D, alpha: u32, up_to: usize) -> f64 {
        let mut c: f64 = 0.0;
        for n in 2..=up_to.max(2) {
            let prof = self.coeff_profile(n, xgrid);
            let norm = weighted_norm_1d_slice(&prof, xgrid, 0, alpha);
            if norm > 0.0 {
                let target = norm / factorial(n.saturating_sub(2));
                c = c.max(target.powf(1.0 / n as f64));
            }
        }
        c
    }

    /// Load per-order profiles from a CSV file with a header row
    /// `x,order2,order3,...` (column names `order<N>`).
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .filter(|l| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
        let header = lines
            .next()
            .ok_or_else(|| Error::Config("empty forcing CSV".into()))?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        if cols.is_empty() || cols[0] != "x" {
            return Err(Error::Config(
                "forcing CSV must start with an `x` column".into(),
            ));
        }
        let mut orders = Vec::new();
        for c in &cols[1..] {
            let o: usize = c
                .strip_prefix("order")
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| {
                    Error::Config(format!(
                        "forcing CSV column `{c}` is not of the form orderN"
                    ))
                })?;
            orders.push(o);
        }
        let mut xs = Vec::new();
        let mut profiles = vec![Vec::new(); orders.len()];
        for line in lines {
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != cols.len() {
                return Err(Error::Config(format!(
                    "forcing CSV row has {} fields, expected {}",
                    fields.len(),
                    cols.len()
                )));
            }
            let parse = |s: &str| -> Result<f64> {
                s.parse()
                    .map_err(|_| Error::Config(format!("bad number `{s}` in forcing CSV")))
            };
            xs.push(parse(fields[0])?);
            for (k, f) in fields[1..].iter().enumerate() {
                profiles[k].push(parse(f)?);
            }
        }
        let fam = ForcingFamily::Tabulated {
            xs,
            orders,
            profiles,
        };
        fam.validate()?;
        Ok(fam)
    }

    /// Forcing profile F(ε, ·) summed through `order`, as a 1D grid function.
    pub fn profile_on(&self, eps: f64, xgrid: &Arc<Grid1D>, order: usize) -> GridFn1D {
        GridFn1D::from_fn(xgrid.clone(), |x| self.eval(eps, x, order))
    }
}

pub fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

fn interp_cubic(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let n = xs.len();
    if x <= xs[0] {
        return ys[0];
    }
    if x >= xs[n - 1] {
        return ys[n - 1];
    }
    let cell = match xs.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
        Ok(i) => return ys[i],
        Err(i) => (i - 1).min(n - 2),
    };
    let start = cell.saturating_sub(1).min(n - 4);
    let mut acc = 0.0;
    for k in 0..4 {
        let mut lk = 1.0;
        for l in 0..4 {
            if l != k {
                lk *= (x - xs[start + l]) / (xs[start + k] - xs[start + l]);
            }
        }
        acc += lk * ys[start + k];
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn low_orders_vanish() {
        let f = ForcingFamily::Gaussian {
            amplitude: 1.0,
            x0: 0.0,
            sigma: 1.5,
        };
        let g = Grid1D::uniform(-10.0, 10.0, 101).unwrap();
        assert!(f.coeff_profile(0, &g).iter().all(|&v| v == 0.0));
        assert!(f.coeff_profile(1, &g).iter().all(|&v| v == 0.0));
        assert!(f.coeff_profile(2, &g).iter().any(|&v| v != 0.0));
    }

    #[test]
    fn poly_rejects_low_order_terms() {
        let f = ForcingFamily::Poly {
            terms: vec![ForcingTerm {
                order: 1,
                shape: Profile::Sech2 { amplitude: 1.0 },
            }],
        };
        assert!(f.validate().is_err());
    }

    #[test]
    fn eval_sums_orders() {
        let f = ForcingFamily::Poly {
            terms: vec![
                ForcingTerm {
                    order: 2,
                    shape: Profile::Gaussian {
                        amplitude: 1.0,
                        x0: 0.0,
                        sigma: 1.0,
                    },
                },
                ForcingTerm {
                    order: 3,
                    shape: Profile::Sech2 { amplitude: 2.0 },
                },
            ],
        };
        let eps = 0.1_f64;
        let x = 0.4_f64;
        let expect = eps * eps * (-(x * x) / 2.0).exp() + eps.powi(3) * 2.0 / (x.cosh() * x.cosh());
        assert!((f.eval(eps, x, 4) - expect).abs() < 1e-14);
    }

    #[test]
    fn growth_constant_zero_for_zero_forcing() {
        let g = Grid1D::uniform(-10.0, 10.0, 101).unwrap();
        assert_eq!(ForcingFamily::Zero.growth_constant(&g, 1, 6), 0.0);
    }

    #[test]
    fn csv_roundtrip() {
        let text = "x,order2,order3\n-1.0,0.0,1.0\n-0.5,0.25,0.75\n0.0,1.0,0.5\n0.5,0.25,0.25\n1.0,0.0,0.0\n1.5,0.0,0.0\n2.0,0.0,0.0\n2.5,0.0,0.0\n";
        let f = ForcingFamily::from_csv(text).unwrap();
        assert_eq!(f.max_order(), 3);
        assert!((f.coeff_at(2, 0.0) - 1.0).abs() < 1e-14);
        assert!((f.coeff_at(3, -1.0) - 1.0).abs() < 1e-14);
        assert!(ForcingFamily::from_csv("x,bad\n0,1\n").is_err());
    }
}
