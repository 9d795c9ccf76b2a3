//! Line-oriented text format for series.
//!
//! ```text
//! hamseries v1
//! modes tangent=1,2 jmax=8
//! cutoffs K=6 D=4 real=1
//! 1,-1|0,1|mu(3:1)|gamma(-5:2)|1.0000000000000000e0,0.0000000000000000e0
//! ```

use num_complex::Complex64 as C64;
use std::fmt::Write as _;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::modes::{ModeSystem, SiteMap, TermIndex};
use crate::series::HamSeries;

/// Float formatting shared by every text artifact: 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn sites(s: &SiteMap) -> String {
    s.iter().map(|(j, p)| format!("{j}:{p}")).collect::<Vec<_>>().join(",")
}

pub fn to_text(h: &HamSeries) -> String {
    let m = h.modes();
    let mut out = String::new();
    out.push_str("hamseries v1\n");
    let _ = writeln!(out, "modes tangent={} jmax={}", join(m.tangent_sites()), m.lattice_cutoff());
    let _ = writeln!(
        out,
        "cutoffs K={} D={} real={}",
        h.fourier_cutoff(),
        h.degree_cutoff(),
        u8::from(h.is_real())
    );
    for (t, c) in h.iter() {
        let _ = writeln!(
            out,
            "{}|{}|mu({})|gamma({})|{},{}",
            join(&t.k),
            join(&t.alpha),
            sites(&t.mu),
            sites(&t.gamma),
            fmt_f64(c.re),
            fmt_f64(c.im)
        );
    }
    out
}

fn perr(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

fn ints<T: std::str::FromStr>(s: &str, line: usize) -> Result<Vec<T>> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|v| v.trim().parse::<T>().map_err(|_| perr(line, format!("bad integer {v:?}"))))
        .collect()
}

fn parse_sites(s: &str, tag: &str, line: usize) -> Result<Vec<(i32, u32)>> {
    let inner = s
        .strip_prefix(tag)
        .and_then(|r| r.strip_prefix('('))
        .and_then(|r| r.strip_suffix(')'))
        .ok_or_else(|| perr(line, format!("expected {tag}(...)")))?;
    if inner.is_empty() {
        return Ok(Vec::new());
    }
    inner
        .split(',')
        .map(|e| {
            let (j, p) = e.split_once(':').ok_or_else(|| perr(line, "site entry needs site:pow"))?;
            Ok((
                j.parse().map_err(|_| perr(line, "bad site"))?,
                p.parse().map_err(|_| perr(line, "bad power"))?,
            ))
        })
        .collect()
}

fn field<'a>(s: &'a str, name: &str, line: usize) -> Result<&'a str> {
    s.split_whitespace()
        .find_map(|kv| kv.strip_prefix(name).and_then(|r| r.strip_prefix('=')))
        .ok_or_else(|| perr(line, format!("missing {name}=")))
}

pub fn from_text(text: &str) -> Result<HamSeries> {
    let mut lines = text.lines().enumerate();
    let (_, head) = lines.next().ok_or_else(|| perr(1, "empty input"))?;
    if head.trim() != "hamseries v1" {
        return Err(perr(1, "missing header"));
    }
    let (_, ml) = lines.next().ok_or_else(|| perr(2, "missing modes line"))?;
    let tangent: Vec<i32> = ints(field(ml, "tangent", 2)?, 2)?;
    let jmax: i32 = field(ml, "jmax", 2)?.parse().map_err(|_| perr(2, "bad jmax"))?;
    let (_, cl) = lines.next().ok_or_else(|| perr(3, "missing cutoffs line"))?;
    let k_cut: u32 = field(cl, "K", 3)?.parse().map_err(|_| perr(3, "bad K"))?;
    let d_cut: u32 = field(cl, "D", 3)?.parse().map_err(|_| perr(3, "bad D"))?;
    let real = field(cl, "real", 3)? == "1";
    let modes = Arc::new(ModeSystem::new(tangent, jmax)?);
    let mut h = HamSeries::new(modes.clone(), k_cut, d_cut, real);
    for (i, l) in lines {
        let line = i + 1;
        if l.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = l.split('|').collect();
        if parts.len() != 5 {
            return Err(perr(line, "expected five fields"));
        }
        let k: Vec<i32> = ints(parts[0], line)?;
        let alpha: Vec<u32> = ints(parts[1], line)?;
        let mu = parse_sites(parts[2], "mu", line)?;
        let gamma = parse_sites(parts[3], "gamma", line)?;
        let (re, im) = parts[4].split_once(',').ok_or_else(|| perr(line, "coefficient needs re,im"))?;
        let c = C64::new(
            re.parse().map_err(|_| perr(line, "bad real part"))?,
            im.parse().map_err(|_| perr(line, "bad imaginary part"))?,
        );
        let t = TermIndex::new(&k, &alpha, &mu, &gamma);
        t.check(&modes).map_err(|e| perr(line, e.to_string()))?;
        if !h.fits(&t) {
            return Err(perr(line, "term exceeds cutoffs"));
        }
        h.raw_terms_mut().insert(t, c);
    }
    Ok(h)
}
