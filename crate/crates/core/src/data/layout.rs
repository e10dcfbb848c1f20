use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{ModelSpec, Variant};
use crate::error::{Error, Result};
use crate::garch::GarchParams;
use crate::pricing::PriceParams;

/// Block offsets of the flat parameter vector.
///
/// Order: `kappa_world` (L_g), `kappa_local` (L_l per non-world asset),
/// vech of lower-triangular `C` (row-major, N(N+1)/2), `a`, `b`, then `s`
/// and `z` unless symmetric, then `alpha` (N-1) and `phi` (L_l-1 per
/// non-world asset) when augmented.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParameterLayout {
    pub variant: Variant,
    pub n_assets: usize,
    pub n_global: usize,
    pub n_local: usize,
    pub kappa_world: Range<usize>,
    pub kappa_local: Vec<Range<usize>>,
    pub c_vech: Range<usize>,
    pub a: Range<usize>,
    pub b: Range<usize>,
    pub s: Option<Range<usize>>,
    pub z: Option<Range<usize>>,
    pub alpha: Option<Range<usize>>,
    pub phi: Vec<Range<usize>>,
    len: usize,
}

/// Structured view of a parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub prices: PriceParams,
    pub garch: GarchParams,
}

impl ParameterLayout {
    pub fn new(spec: &ModelSpec) -> Result<Self> {
        spec.validate()?;
        let n = spec.n_assets;
        let mut cursor = 0usize;
        let mut take = |len: usize| {
            let r = cursor..cursor + len;
            cursor += len;
            r
        };
        let kappa_world = take(spec.n_global);
        let kappa_local = (0..n - 1).map(|_| take(spec.n_local)).collect();
        let c_vech = take(n * (n + 1) / 2);
        let a = take(n);
        let b = take(n);
        let (s, z) = if spec.variant.has_asymmetry() {
            (Some(take(n)), Some(take(n)))
        } else {
            (None, None)
        };
        let (alpha, phi) = if spec.variant.is_augmented() {
            let alpha = take(n - 1);
            let phi = (0..n - 1).map(|_| take(spec.n_local - 1)).collect();
            (Some(alpha), phi)
        } else {
            (None, Vec::new())
        };
        Ok(Self {
            variant: spec.variant,
            n_assets: n,
            n_global: spec.n_global,
            n_local: spec.n_local,
            kappa_world,
            kappa_local,
            c_vech,
            a,
            b,
            s,
            z,
            alpha,
            phi,
            len: cursor,
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Position of `C[i, j]` (i ≥ j) in the flat vector.
    pub fn c_index(&self, i: usize, j: usize) -> usize {
        debug_assert!(j <= i && i < self.n_assets);
        self.c_vech.start + i * (i + 1) / 2 + j
    }

    fn check_len(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.len {
            return Err(Error::Shape(format!(
                "parameter vector has length {}, layout expects {}",
                theta.len(),
                self.len
            )));
        }
        Ok(())
    }

    pub fn unpack(&self, theta: &[f64]) -> Result<ModelParams> {
        self.check_len(theta)?;
        let n = self.n_assets;
        let vec = |r: &Range<usize>| DVector::from_column_slice(&theta[r.clone()]);
        let mut c = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                c[(i, j)] = theta[self.c_index(i, j)];
            }
        }
        let zeros = DVector::zeros(n);
        let garch = GarchParams {
            c,
            a: vec(&self.a),
            b: vec(&self.b),
            s: self.s.as_ref().map_or_else(|| zeros.clone(), vec),
            z: self.z.as_ref().map_or_else(|| zeros.clone(), vec),
        };
        let prices = PriceParams {
            kappa_world: vec(&self.kappa_world),
            kappa_local: self.kappa_local.iter().map(vec).collect(),
            alpha: self.alpha.as_ref().map(vec),
            phi: self
                .alpha
                .as_ref()
                .map(|_| self.phi.iter().map(vec).collect()),
        };
        Ok(ModelParams { prices, garch })
    }

    /// Packs `params` into this layout. Blocks absent from the layout are
    /// dropped; blocks absent from `params` (alpha/phi) are written as zero.
    pub fn pack(&self, params: &ModelParams) -> Result<Vec<f64>> {
        let n = self.n_assets;
        let g = &params.garch;
        let p = &params.prices;
        if g.c.shape() != (n, n) || p.kappa_local.len() != n - 1 {
            return Err(Error::Shape("parameter dimensions do not match layout".into()));
        }
        let mut theta = vec![0.0; self.len];
        let mut put = |r: &Range<usize>, v: &DVector<f64>| -> Result<()> {
            if v.len() != r.len() {
                return Err(Error::Shape(format!(
                    "block of length {} for range of length {}",
                    v.len(),
                    r.len()
                )));
            }
            theta[r.clone()].copy_from_slice(v.as_slice());
            Ok(())
        };
        put(&self.kappa_world, &p.kappa_world)?;
        for (r, k) in self.kappa_local.iter().zip(&p.kappa_local) {
            put(r, k)?;
        }
        put(&self.a, &g.a)?;
        put(&self.b, &g.b)?;
        if let Some(r) = &self.s {
            put(r, &g.s)?;
        }
        if let Some(r) = &self.z {
            put(r, &g.z)?;
        }
        if let (Some(r), Some(alpha)) = (&self.alpha, &p.alpha) {
            put(r, alpha)?;
        }
        if let Some(phi) = &p.phi {
            if !self.phi.is_empty() {
                for (r, v) in self.phi.iter().zip(phi) {
                    put(r, v)?;
                }
            }
        }
        for i in 0..n {
            for j in 0..=i {
                theta[self.c_index(i, j)] = g.c[(i, j)];
            }
        }
        Ok(theta)
    }

    /// Re-expresses `theta` (laid out by `self`) in `target`'s layout;
    /// parameters the source lacks start at zero.
    pub fn embed(&self, theta: &[f64], target: &ParameterLayout) -> Result<Vec<f64>> {
        if self.n_assets != target.n_assets
            || self.n_global != target.n_global
            || self.n_local != target.n_local
        {
            return Err(Error::Shape("layouts differ in dimensions".into()));
        }
        let mut params = self.unpack(theta)?;
        if target.variant.is_augmented() && params.prices.alpha.is_none() {
            params.prices.alpha = Some(DVector::zeros(self.n_assets - 1));
            params.prices.phi = Some(vec![DVector::zeros(self.n_local - 1); self.n_assets - 1]);
        }
        target.pack(&params)
    }

    /// Maps `theta` onto the observationally equivalent point with the
    /// first element of each of `a`, `b`, `s`, `z` nonnegative and each row
    /// of `C` having a nonnegative diagonal. These sign flips leave `C'C`
    /// and every rank-one Hadamard term unchanged.
    pub fn canonicalize(&self, theta: &mut [f64]) {
        for r in [Some(&self.a), Some(&self.b), self.s.as_ref(), self.z.as_ref()]
            .into_iter()
            .flatten()
        {
            if theta[r.start] < 0.0 {
                theta[r.clone()].iter_mut().for_each(|v| *v = -*v);
            }
        }
        for i in 0..self.n_assets {
            if theta[self.c_index(i, i)] < 0.0 {
                for j in 0..=i {
                    let k = self.c_index(i, j);
                    theta[k] = -theta[k];
                }
            }
        }
    }

    /// Indices of the GARCH blocks (`C`, `a`, `b`, `s`, `z`).
    pub fn garch_indices(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = self.c_vech.clone().chain(self.a.clone()).chain(self.b.clone()).collect();
        for r in [&self.s, &self.z].into_iter().flatten() {
            idx.extend(r.clone());
        }
        idx
    }

    /// Human-readable label for each position, using the supplied names.
    pub fn labels(&self, asset_names: &[String], global_names: &[String], local_names: &[String]) -> Vec<String> {
        let n = self.n_assets;
        let name = |i: usize| asset_names.get(i).cloned().unwrap_or_else(|| format!("asset{i}"));
        // non-world assets occupy columns 0..n-1
        let gname = |j: usize| global_names.get(j).cloned().unwrap_or_else(|| format!("g{j}"));
        let lname = |j: usize| local_names.get(j).cloned().unwrap_or_else(|| format!("l{j}"));
        let mut labels = vec![String::new(); self.len];
        for (j, k) in self.kappa_world.clone().enumerate() {
            labels[k] = format!("kappa_world[{}]", gname(j));
        }
        for (i, r) in self.kappa_local.iter().enumerate() {
            for (j, k) in r.clone().enumerate() {
                labels[k] = format!("kappa_local[{}][{}]", name(i), lname(j));
            }
        }
        for i in 0..n {
            for j in 0..=i {
                labels[self.c_index(i, j)] = format!("C[{i},{j}]");
            }
        }
        let vec_blocks = [("a", Some(&self.a)), ("b", Some(&self.b)), ("s", self.s.as_ref()), ("z", self.z.as_ref())];
        for (tag, r) in vec_blocks {
            if let Some(r) = r {
                for (i, k) in r.clone().enumerate() {
                    labels[k] = format!("{tag}[{}]", name(i));
                }
            }
        }
        if let Some(r) = &self.alpha {
            for (i, k) in r.clone().enumerate() {
                labels[k] = format!("alpha[{}]", name(i));
            }
        }
        for (i, r) in self.phi.iter().enumerate() {
            for (j, k) in r.clone().enumerate() {
                labels[k] = format!("phi[{}][{}]", name(i), lname(j + 1));
            }
        }
        labels
    }
}
