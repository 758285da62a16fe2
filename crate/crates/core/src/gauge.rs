//! U(1) link fields for `L^k` and a diagonal `U(1)^r` connection on `E`.
//!
//! The link `U_a(x)` lives on the edge from `x` to `x + a` and parallel
//! transports from `x + a` back to `x`. Every counterclockwise plaquette in a
//! coordinate plane multiplies to `exp(-i flux)`.

use std::f64::consts::PI;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::geometry::{Lattice, ModelManifold};
use crate::linalg::{CMatrix, C64, ONE, ZERO};

/// Exact record of Landau-gauge links: the angle of each link is
/// `2 pi numerator / resolution^2`.
#[derive(Clone, Debug, PartialEq)]
struct ExactAngles {
    numerators: Vec<Vec<i64>>,
}

#[derive(Clone, Debug)]
pub struct GaugeField {
    pub k: u32,
    /// Chern number of `L` on each coordinate plane.
    pub chern: Vec<i64>,
    pub rank_e: usize,
    /// Chern number of the twisted first summand of `E` on each plane.
    pub chern_e: Vec<i64>,
    lattice: Lattice,
    /// `[axis][site]` phases of `L^k`.
    line: Vec<Vec<C64>>,
    /// `[summand][axis][site]` phases of `E`.
    aux: Vec<Vec<Vec<C64>>>,
    exact: Option<ExactAngles>,
}

fn landau_numerators(lattice: &Lattice, flux_quanta: &[i64]) -> Vec<Vec<i64>> {
    let n = lattice.resolution() as i64;
    let modulus = n * n;
    let mut out = vec![vec![0i64; lattice.site_count()]; lattice.dims()];
    for (plane, &f) in flux_quanta.iter().enumerate() {
        let (ax, ay) = (2 * plane, 2 * plane + 1);
        for site in 0..lattice.site_count() {
            let x = lattice.coord(site, ax) as i64;
            let y = lattice.coord(site, ay) as i64;
            out[ay][site] = (-f * x).rem_euclid(modulus);
            if x == n - 1 {
                out[ax][site] = (f * n * y).rem_euclid(modulus);
            }
        }
    }
    out
}

fn phases_from(numerators: &[Vec<i64>], resolution: usize) -> Vec<Vec<C64>> {
    let modulus = (resolution * resolution) as i64;
    numerators
        .iter()
        .map(|axis| {
            axis.iter()
                .map(|&p| {
                    let t = 2.0 * PI * (p.rem_euclid(modulus) as f64) / modulus as f64;
                    C64::from_polar(1.0, t)
                })
                .collect()
        })
        .collect()
}

/// Landau-gauge field for `L^k` with the given per-plane Chern numbers and trivial `E`.
pub fn assign_line_bundle(model: &ModelManifold, k: u32, chern: &[i64]) -> Result<GaugeField> {
    let lattice = model.require_lattice()?.clone();
    if chern != model.periods.as_slice() {
        return Err(Error::ChernMismatch { given: chern.to_vec(), expected: model.periods.clone() });
    }
    let quanta: Vec<i64> = chern.iter().map(|c| c * k as i64).collect();
    let numerators = landau_numerators(&lattice, &quanta);
    let line = phases_from(&numerators, lattice.resolution());
    let trivial = vec![vec![ONE; lattice.site_count()]; lattice.dims()];
    Ok(GaugeField {
        k,
        chern: chern.to_vec(),
        rank_e: 1,
        chern_e: vec![0; model.n],
        lattice,
        line,
        aux: vec![trivial],
        exact: Some(ExactAngles { numerators }),
    })
}

/// `field^m`: link phases raised to the `m`-th power.
pub fn tensor_power(field: &GaugeField, m: u32) -> GaugeField {
    let mut out = field.clone();
    out.k = field.k * m;
    match &field.exact {
        Some(exact) => {
            let numerators: Vec<Vec<i64>> =
                exact.numerators.iter().map(|a| a.iter().map(|p| p * m as i64).collect()).collect();
            out.line = phases_from(&numerators, field.lattice.resolution());
            out.exact = Some(ExactAngles { numerators });
        }
        None => {
            out.line = field.line.iter().map(|a| a.iter().map(|z| z.powu(m)).collect()).collect();
        }
    }
    out
}

impl GaugeField {
    /// Replace `E` by `rank` line bundles; the first carries Chern numbers `chern_e`.
    pub fn with_auxiliary_bundle(mut self, rank: usize, chern_e: &[i64]) -> Result<Self> {
        if rank == 0 {
            return Err(Error::InvalidParameter("rank of E must be positive".into()));
        }
        if chern_e.len() != self.chern.len() {
            return Err(Error::Dimension(format!(
                "expected {} Chern numbers for E, got {}",
                self.chern.len(),
                chern_e.len()
            )));
        }
        let twisted = phases_from(&landau_numerators(&self.lattice, chern_e), self.lattice.resolution());
        let trivial = vec![vec![ONE; self.lattice.site_count()]; self.lattice.dims()];
        self.aux = std::iter::once(twisted).chain(std::iter::repeat(trivial).take(rank - 1)).collect();
        self.rank_e = rank;
        self.chern_e = chern_e.to_vec();
        Ok(self)
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn line_link(&self, axis: usize, site: usize) -> C64 {
        self.line[axis][site]
    }

    /// The `E` part of a link as an `r x r` unitary.
    pub fn aux_link(&self, axis: usize, site: usize) -> CMatrix {
        let d: Vec<C64> = self.aux.iter().map(|s| s[axis][site]).collect();
        CMatrix::diagonal(&d)
    }

    /// Full `L^k (x) E` link on summand `s`.
    pub fn link(&self, summand: usize, axis: usize, site: usize) -> C64 {
        self.line[axis][site] * self.aux[summand][axis][site]
    }

    /// All links of summand `s` along `axis`, indexed by site.
    pub fn links(&self, summand: usize, axis: usize) -> Vec<C64> {
        self.line[axis].iter().zip(&self.aux[summand][axis]).map(|(a, b)| a * b).collect()
    }

    /// Counterclockwise plaquette product of summand `s` in the plane `(ax, ay)` at `site`.
    pub fn plaquette(&self, summand: usize, ax: usize, ay: usize, site: usize) -> C64 {
        let l = &self.lattice;
        let sx = l.forward(site, ax);
        let sy = l.forward(site, ay);
        self.link(summand, ax, site)
            * self.link(summand, ay, sx)
            * self.link(summand, ax, sy).conj()
            * self.link(summand, ay, site).conj()
    }

    /// Same for the `L^k` part alone.
    pub fn line_plaquette(&self, ax: usize, ay: usize, site: usize) -> C64 {
        let l = &self.lattice;
        let sx = l.forward(site, ax);
        let sy = l.forward(site, ay);
        self.line[ax][site] * self.line[ay][sx] * self.line[ax][sy].conj() * self.line[ay][site].conj()
    }

    /// Flux per plaquette of `L^k` on each plane, `2 pi k c / N^2`.
    pub fn plaquette_flux(&self) -> Vec<f64> {
        let n2 = (self.lattice.resolution() * self.lattice.resolution()) as f64;
        self.chern.iter().map(|c| 2.0 * PI * (self.k as i64 * c) as f64 / n2).collect()
    }

    /// Total `L^k` flux per plane recovered from plaquette winding, checked on every 2-plane slice.
    pub fn recovered_chern(&self) -> Result<Vec<i64>> {
        let l = &self.lattice;
        let mut out = Vec::new();
        for plane in 0..self.chern.len() {
            let (ax, ay) = (2 * plane, 2 * plane + 1);
            let mut slices: std::collections::BTreeMap<Vec<usize>, f64> = Default::default();
            for site in 0..l.site_count() {
                let mut key = l.coords(site);
                key[ax] = 0;
                key[ay] = 0;
                *slices.entry(key).or_insert(0.0) -= self.line_plaquette(ax, ay, site).arg();
            }
            let mut value = None;
            for (_, total) in slices {
                let q = total / (2.0 * PI);
                let r = q.round();
                if (q - r).abs() > 1e-6 {
                    return Err(Error::InvalidParameter(format!("non-integral winding {q} on plane {plane}")));
                }
                match value {
                    None => value = Some(r as i64),
                    Some(v) if v != r as i64 => {
                        return Err(Error::InvalidParameter(format!("winding varies across slices of plane {plane}")))
                    }
                    _ => {}
                }
            }
            out.push(value.unwrap_or(0));
        }
        Ok(out)
    }

    /// Apply the site-local transformation `psi(x) -> g(x) psi(x)`.
    pub fn gauge_transform(&self, g: &[C64]) -> Result<GaugeField> {
        let l = &self.lattice;
        if g.len() != l.site_count() {
            return Err(Error::Dimension(format!("{} gauge phases for {} sites", g.len(), l.site_count())));
        }
        let mut out = self.clone();
        for axis in 0..l.dims() {
            for site in 0..l.site_count() {
                out.line[axis][site] = g[site] * self.line[axis][site] * g[l.forward(site, axis)].conj();
            }
        }
        out.exact = None;
        Ok(out)
    }

    /// Phases `G` such that `psi(x) -> G(x) psi(x + shift)` commutes with every
    /// operator built from this field (a magnetic translation).
    pub fn magnetic_translation(&self, summand: usize, shift: &[usize]) -> Result<Vec<C64>> {
        let l = &self.lattice;
        let sites = l.site_count();
        let translate = |site: usize| {
            let mut s = site;
            for (axis, &d) in shift.iter().enumerate() {
                s = l.shift(s, axis, d as isize);
            }
            s
        };
        let mut g = vec![ZERO; sites];
        let mut seen = vec![false; sites];
        g[0] = ONE;
        seen[0] = true;
        let mut queue = std::collections::VecDeque::from([0usize]);
        while let Some(x) = queue.pop_front() {
            for axis in 0..l.dims() {
                let y = l.forward(x, axis);
                // G(x + a) = conj(U(x)) G(x) U(x + L)
                let next = self.link(summand, axis, x).conj() * g[x] * self.link(summand, axis, translate(x));
                if !seen[y] {
                    seen[y] = true;
                    g[y] = next;
                    queue.push_back(y);
                } else if (g[y] - next).norm() > 1e-9 {
                    return Err(Error::GaugeInconsistent { site: y, defect: (g[y] - next).norm() });
                }
            }
        }
        Ok(g)
    }

    /// Plain-text serialization: a header, then one `site dir re im` line per link.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let join = |v: &[i64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let _ = writeln!(s, "gauge-field 1");
        let _ = writeln!(s, "dims {}", self.lattice.dims());
        let _ = writeln!(s, "resolution {}", self.lattice.resolution());
        let sides: Vec<String> =
            self.lattice.spacing().iter().map(|h| (h * self.lattice.resolution() as f64).to_string()).collect();
        let _ = writeln!(s, "sides {}", sides.join(","));
        let _ = writeln!(s, "k {}", self.k);
        let _ = writeln!(s, "chern {}", join(&self.chern));
        let _ = writeln!(s, "rank_e {}", self.rank_e);
        let _ = writeln!(s, "chern_e {}", join(&self.chern_e));
        let mut block = |label: String, links: &Vec<Vec<C64>>| {
            let _ = writeln!(s, "{label}");
            for site in 0..self.lattice.site_count() {
                for (axis, a) in links.iter().enumerate() {
                    let _ = writeln!(s, "{} {} {} {}", site, axis, a[site].re, a[site].im);
                }
            }
        };
        block("line".to_string(), &self.line);
        for (i, summand) in self.aux.iter().enumerate() {
            block(format!("aux {i}"), summand);
        }
        s
    }

    pub fn from_text(text: &str) -> Result<GaugeField> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let err = |line: usize, message: &str| Error::Parse { line: line + 1, message: message.to_string() };
        let mut header = |key: &str| -> Result<(usize, String)> {
            let (i, l) = lines.next().ok_or_else(|| err(0, "truncated header"))?;
            let rest = l
                .strip_prefix(key)
                .and_then(|r| r.strip_prefix(' '))
                .ok_or_else(|| err(i, &format!("expected `{key}`")))?;
            Ok((i, rest.trim().to_string()))
        };
        let parse_usize = |(i, v): (usize, String)| v.parse::<usize>().map_err(|_| err(i, "expected an integer"));
        let parse_list = |(i, v): (usize, String)| -> Result<Vec<i64>> {
            v.split(',').map(|x| x.trim().parse::<i64>().map_err(|_| err(i, "expected integers"))).collect()
        };
        let (i, version) = header("gauge-field")?;
        if version != "1" {
            return Err(err(i, "unsupported version"));
        }
        let dims = parse_usize(header("dims")?)?;
        let resolution = parse_usize(header("resolution")?)?;
        let (i, sides_text) = header("sides")?;
        let sides: Vec<f64> = sides_text
            .split(',')
            .map(|x| x.trim().parse::<f64>().map_err(|_| err(i, "expected floats")))
            .collect::<Result<_>>()?;
        if sides.len() != dims {
            return Err(err(i, "side count does not match dims"));
        }
        let k = parse_usize(header("k")?)? as u32;
        let chern = parse_list(header("chern")?)?;
        let rank_e = parse_usize(header("rank_e")?)?;
        let chern_e = parse_list(header("chern_e")?)?;
        let lattice = Lattice::new(&sides, resolution)?;
        let sites = lattice.site_count();
        let mut read_block = |label: &str| -> Result<Vec<Vec<C64>>> {
            let (i, l) = lines.next().ok_or_else(|| err(0, "missing link block"))?;
            if l.trim() != label {
                return Err(err(i, &format!("expected `{label}`")));
            }
            let mut out = vec![vec![ZERO; sites]; dims];
            for _ in 0..sites * dims {
                let (i, l) = lines.next().ok_or_else(|| err(0, "truncated link block"))?;
                let f: Vec<&str> = l.split_whitespace().collect();
                if f.len() != 4 {
                    return Err(err(i, "expected `site dir re im`"));
                }
                let site: usize = f[0].parse().map_err(|_| err(i, "bad site"))?;
                let axis: usize = f[1].parse().map_err(|_| err(i, "bad direction"))?;
                let re: f64 = f[2].parse().map_err(|_| err(i, "bad real part"))?;
                let im: f64 = f[3].parse().map_err(|_| err(i, "bad imaginary part"))?;
                if site >= sites || axis >= dims {
                    return Err(err(i, "link out of range"));
                }
                out[axis][site] = C64::new(re, im);
            }
            Ok(out)
        };
        let line = read_block("line")?;
        let aux = (0..rank_e).map(|s| read_block(&format!("aux {s}"))).collect::<Result<Vec<_>>>()?;
        Ok(GaugeField { k, chern, rank_e, chern_e, lattice, line, aux, exact: None })
    }

    /// Largest link difference to another field on the same lattice.
    pub fn max_link_difference(&self, other: &GaugeField) -> f64 {
        let mut worst: f64 = 0.0;
        for (a, b) in self.line.iter().zip(&other.line) {
            for (x, y) in a.iter().zip(b) {
                worst = worst.max((x - y).norm());
            }
        }
        for (s, t) in self.aux.iter().zip(&other.aux) {
            for (a, b) in s.iter().zip(t) {
                for (x, y) in a.iter().zip(b) {
                    worst = worst.max((x - y).norm());
                }
            }
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_torus_model;

    fn torus(n: usize) -> ModelManifold {
        build_torus_model(1, &[1.0, 1.0], n, &[1.0]).unwrap()
    }

    #[test]
    fn uniform_plaquette_flux() {
        let m = torus(4);
        let f = assign_line_bundle(&m, 1, &[1]).unwrap();
        let target = C64::from_polar(1.0, -2.0 * PI / 16.0);
        let mut total = ONE;
        for site in 0..16 {
            let p = f.plaquette(0, 0, 1, site);
            assert!((p - target).norm() < 1e-14, "site {site}: {p}");
            total *= p;
        }
        assert!((total - C64::from_polar(1.0, -2.0 * PI)).norm() < 1e-13);
        assert_eq!(f.recovered_chern().unwrap(), vec![1]);
    }

    #[test]
    fn flux_three_on_eight() {
        let f = assign_line_bundle(&torus(8), 3, &[1]).unwrap();
        assert!((f.plaquette_flux()[0] - 6.0 * PI / 64.0).abs() < 1e-15);
        let target = C64::from_polar(1.0, -6.0 * PI / 64.0);
        for site in 0..64 {
            assert!((f.plaquette(0, 0, 1, site) - target).norm() < 1e-14);
        }
        assert_eq!(f.recovered_chern().unwrap(), vec![3]);
    }

    #[test]
    fn trivial_and_powers() {
        let m = torus(8);
        let f0 = assign_line_bundle(&m, 0, &[1]).unwrap();
        assert!(f0.line.iter().flatten().all(|z| *z == ONE));
        let f1 = assign_line_bundle(&m, 1, &[1]).unwrap();
        assert_eq!(tensor_power(&f1, 1).max_link_difference(&f1), 0.0);
        assert!(tensor_power(&f1, 0).line.iter().flatten().all(|z| *z == ONE));
        let f2 = tensor_power(&f1, 2);
        assert_eq!(f2.max_link_difference(&assign_line_bundle(&m, 2, &[1]).unwrap()), 0.0);
        let p1 = f1.plaquette(0, 0, 1, 9).arg();
        let p2 = f2.plaquette(0, 0, 1, 9).arg();
        assert!((p2 - 2.0 * p1).abs() < 1e-14);
    }

    #[test]
    fn chern_mismatch_is_rejected() {
        assert!(matches!(assign_line_bundle(&torus(8), 1, &[2]), Err(Error::ChernMismatch { .. })));
    }

    #[test]
    fn auxiliary_twist() {
        let f = assign_line_bundle(&torus(8), 2, &[1]).unwrap().with_auxiliary_bundle(2, &[1]).unwrap();
        let twisted = C64::from_polar(1.0, -2.0 * PI * 3.0 / 64.0);
        let plain = C64::from_polar(1.0, -2.0 * PI * 2.0 / 64.0);
        assert!((f.plaquette(0, 0, 1, 5) - twisted).norm() < 1e-14);
        assert!((f.plaquette(1, 0, 1, 5) - plain).norm() < 1e-14);
        assert_eq!(f.aux_link(1, 3).rows, 2);
    }

    #[test]
    fn text_round_trip() {
        let f = assign_line_bundle(&torus(4), 2, &[1]).unwrap().with_auxiliary_bundle(2, &[1]).unwrap();
        let back = GaugeField::from_text(&f.to_text()).unwrap();
        assert_eq!(back.max_link_difference(&f), 0.0);
        assert_eq!(back.chern_e, vec![1]);
        assert!(GaugeField::from_text("gauge-field 2\n").is_err());
    }

    #[test]
    fn magnetic_translations_need_integral_holonomy_shift() {
        let f = assign_line_bundle(&torus(8), 4, &[1]).unwrap();
        assert!(f.magnetic_translation(0, &[2, 0]).is_ok());
        assert!(f.magnetic_translation(0, &[0, 2]).is_ok());
        assert!(matches!(f.magnetic_translation(0, &[1, 0]), Err(Error::GaugeInconsistent { .. })));
    }
}
