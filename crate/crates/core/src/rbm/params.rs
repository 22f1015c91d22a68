use std::io::{Read, Write};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Standard deviation of the Gaussian used for the initial `w` and `u`.
pub const INIT_STD: f64 = 0.01;

const SNAPSHOT_MAGIC: &[u8; 4] = b"RBMI";
const SNAPSHOT_VERSION: u32 = 1;

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Softmax in place with max-subtraction.
pub fn softmax_in_place(xs: &mut [f64]) {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in xs.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in xs.iter_mut() {
        *x /= sum;
    }
}

/// Weights and biases of the visible/hidden/class RBM.
///
/// `w` is `visible x hidden` and `u` is `hidden x classes`, both row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbmParameters {
    visible: usize,
    hidden: usize,
    classes: usize,
    pub w: Vec<f64>,
    pub u: Vec<f64>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

impl RbmParameters {
    pub fn zeros(visible: usize, hidden: usize, classes: usize) -> Self {
        Self {
            visible,
            hidden,
            classes,
            w: vec![0.0; visible * hidden],
            u: vec![0.0; hidden * classes],
            a: vec![0.0; visible],
            b: vec![0.0; hidden],
            c: vec![0.0; classes],
        }
    }

    /// Gaussian weights (σ = [`INIT_STD`]) and zero biases.
    pub fn random<R: Rng + ?Sized>(
        visible: usize,
        hidden: usize,
        classes: usize,
        rng: &mut R,
    ) -> Self {
        let normal = Normal::new(0.0, INIT_STD).expect("valid std");
        let mut p = Self::zeros(visible, hidden, classes);
        for x in p.w.iter_mut().chain(p.u.iter_mut()) {
            *x = normal.sample(rng);
        }
        p
    }

    /// Rebuilds parameters from raw blocks, checking shapes and finiteness.
    #[allow(clippy::too_many_arguments)]
    pub fn from_blocks(
        visible: usize,
        hidden: usize,
        classes: usize,
        w: Vec<f64>,
        u: Vec<f64>,
        a: Vec<f64>,
        b: Vec<f64>,
        c: Vec<f64>,
    ) -> Result<Self> {
        let p = Self {
            visible,
            hidden,
            classes,
            w,
            u,
            a,
            b,
            c,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let (v, h, z) = (self.visible, self.hidden, self.classes);
        let shapes = [
            ("w", self.w.len(), v * h),
            ("u", self.u.len(), h * z),
            ("a", self.a.len(), v),
            ("b", self.b.len(), h),
            ("c", self.c.len(), z),
        ];
        for (name, got, want) in shapes {
            if got != want {
                return Err(Error::Domain(format!(
                    "block {name} has {got} entries, expected {want}"
                )));
            }
        }
        if !self.blocks().all(|x| x.is_finite()) {
            return Err(Error::Domain("parameters contain non-finite entries".into()));
        }
        Ok(())
    }

    pub fn visible(&self) -> usize {
        self.visible
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    #[inline]
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.w[i * self.hidden + j]
    }

    #[inline]
    pub fn class_weight(&self, j: usize, k: usize) -> f64 {
        self.u[j * self.classes + k]
    }

    /// All entries in snapshot order: w, u, a, b, c.
    pub fn blocks(&self) -> impl Iterator<Item = f64> + '_ {
        self.w
            .iter()
            .chain(&self.u)
            .chain(&self.a)
            .chain(&self.b)
            .chain(&self.c)
            .copied()
    }

    fn check_len(&self, what: &str, got: usize, want: usize) -> Result<()> {
        if got == want {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "{what} has length {got}, expected {want}"
            )))
        }
    }

    pub fn energy(&self, v: &[f64], h: &[f64], z: &[f64]) -> Result<f64> {
        self.check_len("v", v.len(), self.visible)?;
        self.check_len("h", h.len(), self.hidden)?;
        self.check_len("z", z.len(), self.classes)?;
        let mut e = 0.0;
        e -= dot(v, &self.a);
        e -= dot(h, &self.b);
        e -= dot(z, &self.c);
        for (i, &vi) in v.iter().enumerate() {
            if vi != 0.0 {
                e -= vi * dot(h, &self.w[i * self.hidden..(i + 1) * self.hidden]);
            }
        }
        for (j, &hj) in h.iter().enumerate() {
            if hj != 0.0 {
                e -= hj * dot(z, &self.u[j * self.classes..(j + 1) * self.classes]);
            }
        }
        Ok(e)
    }

    pub fn hidden_activation(&self, v: &[f64], z: &[f64]) -> Result<Vec<f64>> {
        self.check_len("v", v.len(), self.visible)?;
        self.check_len("z", z.len(), self.classes)?;
        let mut out = vec![0.0; self.hidden];
        self.hidden_probs_into(v, z, &mut out);
        Ok(out)
    }

    pub fn visible_activation(&self, h: &[f64]) -> Result<Vec<f64>> {
        self.check_len("h", h.len(), self.hidden)?;
        let mut out = vec![0.0; self.visible];
        self.visible_probs_into(h, &mut out);
        Ok(out)
    }

    pub fn class_activation(&self, h: &[f64]) -> Result<Vec<f64>> {
        self.check_len("h", h.len(), self.hidden)?;
        let mut out = vec![0.0; self.classes];
        self.class_probs_into(h, &mut out);
        Ok(out)
    }

    /// `σ(b_j + Σ_i v_i w_ij + Σ_k z_k u_jk)`; lengths are the caller's
    /// responsibility.
    pub(crate) fn hidden_probs_into(&self, v: &[f64], z: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.b);
        for (i, &vi) in v.iter().enumerate() {
            if vi != 0.0 {
                let row = &self.w[i * self.hidden..(i + 1) * self.hidden];
                for (o, &wij) in out.iter_mut().zip(row) {
                    *o += vi * wij;
                }
            }
        }
        for (j, o) in out.iter_mut().enumerate() {
            let row = &self.u[j * self.classes..(j + 1) * self.classes];
            *o = sigmoid(*o + dot(z, row));
        }
    }

    pub(crate) fn visible_probs_into(&self, h: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.w[i * self.hidden..(i + 1) * self.hidden];
            *o = sigmoid(self.a[i] + dot(h, row));
        }
    }

    pub(crate) fn class_probs_into(&self, h: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.c);
        for (j, &hj) in h.iter().enumerate() {
            if hj != 0.0 {
                let row = &self.u[j * self.classes..(j + 1) * self.classes];
                for (o, &ujk) in out.iter_mut().zip(row) {
                    *o += hj * ujk;
                }
            }
        }
        softmax_in_place(out);
    }

    /// Little-endian binary snapshot: magic, version, `V H Z` as u64, then
    /// row-major blocks w, u, a, b, c as f64.
    pub fn write_binary<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(SNAPSHOT_MAGIC)?;
        out.write_all(&SNAPSHOT_VERSION.to_le_bytes())?;
        for n in [self.visible, self.hidden, self.classes] {
            out.write_all(&(n as u64).to_le_bytes())?;
        }
        for x in self.blocks() {
            out.write_all(&x.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut input: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        input.read_exact(&mut magic)?;
        if &magic != SNAPSHOT_MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        let mut u32buf = [0u8; 4];
        input.read_exact(&mut u32buf)?;
        let version = u32::from_le_bytes(u32buf);
        if version != SNAPSHOT_VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let mut dims = [0usize; 3];
        let mut u64buf = [0u8; 8];
        for d in &mut dims {
            input.read_exact(&mut u64buf)?;
            *d = usize::try_from(u64::from_le_bytes(u64buf))
                .map_err(|_| Error::Format("dimension overflows usize".into()))?;
        }
        let [v, h, z] = dims;
        let mut read_block = |n: usize| -> Result<Vec<f64>> {
            let mut block = Vec::with_capacity(n);
            for _ in 0..n {
                input.read_exact(&mut u64buf)?;
                block.push(f64::from_le_bytes(u64buf));
            }
            Ok(block)
        };
        let w = read_block(v * h)?;
        let u = read_block(h * z)?;
        let a = read_block(v)?;
        let b = read_block(h)?;
        let c = read_block(z)?;
        Self::from_blocks(v, h, z, w, u, a, b, c)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let p: Self = serde_json::from_str(s)?;
        p.validate()?;
        Ok(p)
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
