//! Binomial pmf evaluated in log space so large `n` does not underflow.

/// pmf of Binomial(n, q) for k = 0..=n.
pub fn pmf(n: u64, q: f64) -> Vec<f64> {
    let len = n as usize + 1;
    if q <= 0.0 {
        let mut v = vec![0.0; len];
        v[0] = 1.0;
        return v;
    }
    if q >= 1.0 {
        let mut v = vec![0.0; len];
        v[len - 1] = 1.0;
        return v;
    }
    let log_ratio = (q / (1.0 - q)).ln();
    let mut log_p = n as f64 * (-q).ln_1p();
    let mut out = Vec::with_capacity(len);
    out.push(log_p.exp());
    for k in 0..n {
        log_p += ((n - k) as f64 / (k + 1) as f64).ln() + log_ratio;
        out.push(log_p.exp());
    }
    out
}

/// P(X >= k0) for X ~ Binomial(n, q).
pub fn upper_tail(n: u64, k0: u64, q: f64) -> f64 {
    if k0 > n {
        return 0.0;
    }
    pmf(n, q)[k0 as usize..].iter().sum::<f64>().min(1.0)
}

/// E[f(X)] for X ~ Binomial(n, q).
pub fn expect(n: u64, q: f64, f: impl Fn(u64) -> f64) -> f64 {
    pmf(n, q)
        .iter()
        .enumerate()
        .filter(|(_, p)| **p > 0.0)
        .map(|(k, p)| p * f(k as u64))
        .sum()
}
