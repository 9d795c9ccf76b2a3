/// Analyticity widths `s_m` and the intermediate ladder `s_m^{(i)}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WidthLadder {
    pub s0: f64,
}

fn zeta2() -> f64 {
    std::f64::consts::PI.powi(2) / 6.0
}

impl WidthLadder {
    pub fn new(s0: f64) -> Self {
        WidthLadder { s0 }
    }

    /// `s_m = s_0 (1 - sum_{j<=m} j^{-2} / (100 sum_j j^{-2}))`.
    pub fn s(&self, m: usize) -> f64 {
        let partial: f64 = (1..=m).map(|j| 1.0 / (j * j) as f64).sum();
        self.s0 * (1.0 - partial / (100.0 * zeta2()))
    }

    /// `s_m^{(i)} = s_{m+1} + (1 - i/10)(s_m - s_{m+1})`.
    pub fn sub(&self, m: usize, i: usize) -> f64 {
        let (a, b) = (self.s(m), self.s(m + 1));
        b + (1.0 - i as f64 / 10.0) * (a - b)
    }
}
