//! Truncated power series in one variable. All series in an expression share
//! the same length `K + 1`.

#[derive(Clone, Debug, PartialEq)]
pub struct Taylor(pub Vec<f64>);

impl Taylor {
    pub fn zero(k: usize) -> Self {
        Taylor(vec![0.0; k + 1])
    }
    pub fn constant(c: f64, k: usize) -> Self {
        let mut t = Self::zero(k);
        t.0[0] = c;
        t
    }
    /// The variable itself.
    pub fn var(k: usize) -> Self {
        let mut t = Self::zero(k);
        if k >= 1 {
            t.0[1] = 1.0;
        }
        t
    }
    pub fn order(&self) -> usize {
        self.0.len() - 1
    }
    pub fn add(&self, o: &Taylor) -> Taylor {
        Taylor(self.0.iter().zip(&o.0).map(|(a, b)| a + b).collect())
    }
    pub fn sub(&self, o: &Taylor) -> Taylor {
        Taylor(self.0.iter().zip(&o.0).map(|(a, b)| a - b).collect())
    }
    pub fn scale(&self, c: f64) -> Taylor {
        Taylor(self.0.iter().map(|a| a * c).collect())
    }
    pub fn mul(&self, o: &Taylor) -> Taylor {
        let k = self.order();
        let mut out = vec![0.0; k + 1];
        for (i, a) in self.0.iter().enumerate() {
            if *a == 0.0 {
                continue;
            }
            for (j, b) in o.0.iter().enumerate().take(k + 1 - i) {
                out[i + j] += a * b;
            }
        }
        Taylor(out)
    }
    pub fn recip(&self) -> Taylor {
        let k = self.order();
        let a0 = self.0[0];
        let mut q = vec![0.0; k + 1];
        q[0] = 1.0 / a0;
        for m in 1..=k {
            let acc: f64 = (1..=m).map(|j| self.0[j] * q[m - j]).sum();
            q[m] = -acc / a0;
        }
        Taylor(q)
    }
    pub fn div(&self, o: &Taylor) -> Taylor {
        self.mul(&o.recip())
    }
    /// `self^alpha`, requires a positive constant term.
    pub fn powf(&self, alpha: f64) -> Taylor {
        let k = self.order();
        let p = &self.0;
        let mut q = vec![0.0; k + 1];
        q[0] = p[0].powf(alpha);
        for m in 1..=k {
            let mut acc = 0.0;
            for j in 1..=m {
                acc += (alpha * j as f64 - (m - j) as f64) * p[j] * q[m - j];
            }
            q[m] = acc / (m as f64 * p[0]);
        }
        Taylor(q)
    }
    pub fn sqrt(&self) -> Taylor {
        self.powf(0.5)
    }
    pub fn derivative(&self) -> Taylor {
        let k = self.order();
        let mut out = vec![0.0; k + 1];
        for i in 1..=k {
            out[i - 1] = i as f64 * self.0[i];
        }
        Taylor(out)
    }
    /// Antiderivative vanishing at zero; the top coefficient is dropped.
    pub fn integral(&self) -> Taylor {
        let k = self.order();
        let mut out = vec![0.0; k + 1];
        for i in 1..=k {
            out[i] = self.0[i - 1] / i as f64;
        }
        Taylor(out)
    }
    /// `(sin, cos)` of the series.
    pub fn sin_cos(&self) -> (Taylor, Taylor) {
        let k = self.order();
        let (mut s, mut c) = (vec![0.0; k + 1], vec![0.0; k + 1]);
        (s[0], c[0]) = self.0[0].sin_cos();
        for m in 1..=k {
            let (mut as_, mut ac) = (0.0, 0.0);
            for j in 1..=m {
                let t = j as f64 * self.0[j];
                as_ += t * c[m - j];
                ac -= t * s[m - j];
            }
            s[m] = as_ / m as f64;
            c[m] = ac / m as f64;
        }
        (Taylor(s), Taylor(c))
    }
    /// `asin` of a series with `|a0| < 1`.
    pub fn asin(&self) -> Taylor {
        let one = Taylor::constant(1.0, self.order());
        let d = self.derivative().div(&one.sub(&self.mul(self)).sqrt());
        let mut out = d.integral();
        out.0[0] = self.0[0].asin();
        out
    }
    /// `f(self)` for a series `f` in a variable that `self` replaces; the
    /// constant term of `self` must be zero.
    pub fn compose_into(f: &Taylor, inner: &Taylor) -> Taylor {
        debug_assert!(inner.0[0] == 0.0);
        let k = inner.order();
        let mut acc = Taylor::constant(*f.0.last().unwrap_or(&0.0), k);
        for c in f.0.iter().rev().skip(1) {
            acc = acc.mul(inner);
            acc.0[0] += c;
        }
        acc
    }
    pub fn eval(&self, x: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |a, c| a * x + c)
    }
}
