//! The learned velocity field: a small tanh MLP taking (z1, z2, t) and
//! returning a 2-vector, with closed-form first and second derivatives in
//! z (the Hessian flow needs second derivatives inside the integrand, so
//! numeric differencing is not an option).

use crate::dense::Mat2;
use crate::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

/// Velocity field f(z, t): two tanh hidden layers of equal width, time
/// appended as a third input feature, linear output.
#[derive(Debug, Clone)]
pub struct VectorField {
    pub width: usize,
    pub w1: Vec<f64>, // width x 3
    pub b1: Vec<f64>,
    pub w2: Vec<f64>, // width x width
    pub b2: Vec<f64>,
    pub w3: Vec<f64>, // 2 x width
    pub b3: Vec<f64>,
}

/// Symmetric per-component Hessian entries [d2f/dz1dz1, d2f/dz1dz2,
/// d2f/dz2dz2] for each of the two outputs.
pub type Hessian2 = [[f64; 3]; 2];

impl VectorField {
    pub fn zeros(width: usize) -> VectorField {
        VectorField {
            width,
            w1: vec![0.0; width * 3],
            b1: vec![0.0; width],
            w2: vec![0.0; width * width],
            b2: vec![0.0; width],
            w3: vec![0.0; 2 * width],
            b3: vec![0.0; 2],
        }
    }

    /// Random hidden layers with a zero output layer, so the initial flow
    /// is exactly the identity map.
    pub fn init_identity(width: usize, seed: u64) -> VectorField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut f = VectorField::zeros(width);
        let s1 = (1.0 / 3.0f64).sqrt();
        for w in f.w1.iter_mut() {
            *w = rng.gen_range(-s1..s1);
        }
        let s2 = (1.0 / width as f64).sqrt();
        for w in f.w2.iter_mut() {
            *w = rng.gen_range(-s2..s2);
        }
        f
    }

    pub fn parameter_count(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len() + self.w3.len() + self.b3.len()
    }

    /// Flat view of all parameters in declared order.
    pub fn parameters(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.parameter_count());
        out.extend_from_slice(&self.w1);
        out.extend_from_slice(&self.b1);
        out.extend_from_slice(&self.w2);
        out.extend_from_slice(&self.b2);
        out.extend_from_slice(&self.w3);
        out.extend_from_slice(&self.b3);
        out
    }

    pub fn set_parameters(&mut self, theta: &[f64]) {
        assert_eq!(theta.len(), self.parameter_count());
        let mut k = 0;
        for dst in [&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2, &mut self.w3, &mut self.b3]
        {
            dst.copy_from_slice(&theta[k..k + dst.len()]);
            k += dst.len();
        }
    }

    pub fn eval(&self, z: [f64; 2], t: f64) -> [f64; 2] {
        let w = self.width;
        let u = [z[0], z[1], t];
        let mut h1 = vec![0.0; w];
        for n in 0..w {
            let a = self.w1[n * 3] * u[0] + self.w1[n * 3 + 1] * u[1] + self.w1[n * 3 + 2] * u[2]
                + self.b1[n];
            h1[n] = a.tanh();
        }
        let mut h2 = vec![0.0; w];
        for n in 0..w {
            let mut a = self.b2[n];
            for m in 0..w {
                a += self.w2[n * w + m] * h1[m];
            }
            h2[n] = a.tanh();
        }
        let mut f = [self.b3[0], self.b3[1]];
        for i in 0..2 {
            for n in 0..w {
                f[i] += self.w3[i * w + n] * h2[n];
            }
        }
        f
    }

    /// Value and Jacobian df/dz (2x2).
    pub fn eval_jac(&self, z: [f64; 2], t: f64) -> ([f64; 2], Mat2) {
        let w = self.width;
        let u = [z[0], z[1], t];
        let mut h1 = vec![0.0; w];
        let mut j1 = vec![[0.0; 2]; w]; // dh1/dz
        for n in 0..w {
            let a = self.w1[n * 3] * u[0] + self.w1[n * 3 + 1] * u[1] + self.w1[n * 3 + 2] * u[2]
                + self.b1[n];
            let h = a.tanh();
            let d = 1.0 - h * h;
            h1[n] = h;
            j1[n] = [d * self.w1[n * 3], d * self.w1[n * 3 + 1]];
        }
        let mut h2 = vec![0.0; w];
        let mut j2 = vec![[0.0; 2]; w];
        for n in 0..w {
            let mut a = self.b2[n];
            let mut ja = [0.0; 2];
            for m in 0..w {
                let wv = self.w2[n * w + m];
                a += wv * h1[m];
                ja[0] += wv * j1[m][0];
                ja[1] += wv * j1[m][1];
            }
            let h = a.tanh();
            let d = 1.0 - h * h;
            h2[n] = h;
            j2[n] = [d * ja[0], d * ja[1]];
        }
        let mut f = [self.b3[0], self.b3[1]];
        let mut jf = [[0.0; 2]; 2];
        for i in 0..2 {
            for n in 0..w {
                let wv = self.w3[i * w + n];
                f[i] += wv * h2[n];
                jf[i][0] += wv * j2[n][0];
                jf[i][1] += wv * j2[n][1];
            }
        }
        (f, Mat2::new(jf[0][0], jf[0][1], jf[1][0], jf[1][1]))
    }

    /// Value, Jacobian, and the symmetric z-Hessian of each component.
    pub fn eval_hess(&self, z: [f64; 2], t: f64) -> ([f64; 2], Mat2, Hessian2) {
        let w = self.width;
        let u = [z[0], z[1], t];
        let mut h1 = vec![0.0; w];
        let mut j1 = vec![[0.0; 2]; w];
        let mut hh1 = vec![[0.0; 3]; w]; // [11, 12, 22]
        for n in 0..w {
            let a = self.w1[n * 3] * u[0] + self.w1[n * 3 + 1] * u[1] + self.w1[n * 3 + 2] * u[2]
                + self.b1[n];
            let h = a.tanh();
            let d = 1.0 - h * h;
            let t2 = -2.0 * h * d;
            let (wa, wb) = (self.w1[n * 3], self.w1[n * 3 + 1]);
            h1[n] = h;
            j1[n] = [d * wa, d * wb];
            hh1[n] = [t2 * wa * wa, t2 * wa * wb, t2 * wb * wb];
        }
        let mut h2 = vec![0.0; w];
        let mut j2 = vec![[0.0; 2]; w];
        let mut hh2 = vec![[0.0; 3]; w];
        for n in 0..w {
            let mut a = self.b2[n];
            let mut ja = [0.0; 2];
            let mut ha = [0.0; 3];
            for m in 0..w {
                let wv = self.w2[n * w + m];
                a += wv * h1[m];
                ja[0] += wv * j1[m][0];
                ja[1] += wv * j1[m][1];
                ha[0] += wv * hh1[m][0];
                ha[1] += wv * hh1[m][1];
                ha[2] += wv * hh1[m][2];
            }
            let h = a.tanh();
            let d = 1.0 - h * h;
            let t2 = -2.0 * h * d;
            h2[n] = h;
            j2[n] = [d * ja[0], d * ja[1]];
            hh2[n] = [
                t2 * ja[0] * ja[0] + d * ha[0],
                t2 * ja[0] * ja[1] + d * ha[1],
                t2 * ja[1] * ja[1] + d * ha[2],
            ];
        }
        let mut f = [self.b3[0], self.b3[1]];
        let mut jf = [[0.0; 2]; 2];
        let mut hf = [[0.0; 3]; 2];
        for i in 0..2 {
            for n in 0..w {
                let wv = self.w3[i * w + n];
                f[i] += wv * h2[n];
                jf[i][0] += wv * j2[n][0];
                jf[i][1] += wv * j2[n][1];
                hf[i][0] += wv * hh2[n][0];
                hf[i][1] += wv * hh2[n][1];
                hf[i][2] += wv * hh2[n][2];
            }
        }
        (f, Mat2::new(jf[0][0], jf[0][1], jf[1][0], jf[1][1]), hf)
    }

    /// Write the checkpoint: version line, layer sizes, integrator steps,
    /// then all parameters in declared order with 17 significant digits.
    pub fn save(&self, path: impl AsRef<Path>, steps: usize) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "dmg-checkpoint v1")?;
        writeln!(f, "layers: 3 {} {} 2", self.width, self.width)?;
        writeln!(f, "steps: {steps}")?;
        for v in self.parameters() {
            writeln!(f, "{v:.16e}")?;
        }
        Ok(())
    }

    /// Read a checkpoint written by [`VectorField::save`]; returns the
    /// field and its recommended integrator step count.
    pub fn load(path: impl AsRef<Path>) -> Result<(VectorField, usize)> {
        let f = BufReader::new(std::fs::File::open(&path)?);
        let mut lines = f.lines();
        let header = lines
            .next()
            .transpose()?
            .ok_or_else(|| Error::training("empty checkpoint file"))?;
        if header.trim() != "dmg-checkpoint v1" {
            return Err(Error::training(format!("unknown checkpoint version: '{header}'")));
        }
        let layers_line = lines
            .next()
            .transpose()?
            .ok_or_else(|| Error::training("checkpoint missing layers line"))?;
        let sizes: Vec<usize> = layers_line
            .trim()
            .strip_prefix("layers:")
            .ok_or_else(|| Error::training("malformed layers line"))?
            .split_whitespace()
            .map(|s| s.parse().map_err(|_| Error::training("bad layer size")))
            .collect::<Result<_>>()?;
        if sizes.len() != 4 || sizes[0] != 3 || sizes[3] != 2 || sizes[1] != sizes[2] {
            return Err(Error::training(format!("unsupported layer shape {sizes:?}")));
        }
        let steps_line = lines
            .next()
            .transpose()?
            .ok_or_else(|| Error::training("checkpoint missing steps line"))?;
        let steps: usize = steps_line
            .trim()
            .strip_prefix("steps:")
            .ok_or_else(|| Error::training("malformed steps line"))?
            .trim()
            .parse()
            .map_err(|_| Error::training("bad steps value"))?;
        let mut field = VectorField::zeros(sizes[1]);
        let mut theta = Vec::with_capacity(field.parameter_count());
        for line in lines {
            let line = line?;
            let s = line.trim();
            if s.is_empty() {
                continue;
            }
            theta.push(s.parse::<f64>().map_err(|_| {
                Error::training(format!("bad parameter value '{s}' in checkpoint"))
            })?);
        }
        if theta.len() != field.parameter_count() {
            return Err(Error::training(format!(
                "checkpoint has {} parameters, expected {}",
                theta.len(),
                field.parameter_count()
            )));
        }
        field.set_parameters(&theta);
        Ok((field, steps))
    }
}
