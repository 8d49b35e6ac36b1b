//! Distribution input: TOML spec files and inline family expressions.
//!
//! ```toml
//! modes = 1
//! kind = "analytic"            # or "grid"
//! family = "manko_fock1(0.5)"  # an array of single-mode families forms a product
//! s = 0.0                      # ordering parameter of the input
//!
//! [[map]]
//! kind = "displacement"        # rotation (phi), rescale (x, y), partial_transpose
//! re = 1.0
//! im = "sqrt(2)/2"
//!
//! [grid]                       # kind = "grid" only
//! extent = [[-6, 6], [-6, 6]]  # per axis, modes ordered (x1, y1, x2, y2)
//! samples = [256, 256]
//! values_file = "w.txt"        # or `values = [...]`, or omit both to sample `family`
//! ```
//!
//! Grid values are row-major with the last axis fastest. A `values_file` ending in
//! `.bin` holds little-endian `f64`s; anything else is whitespace-separated text.
//! Parameters may be numbers or expressions over `pi`, `sqrt`, `+ − * /` and parentheses.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use num_complex::Complex64 as C64;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::grid::{Axis, Grid};
use crate::model::{default_grid_axes, DistributionSpec, Family, PhaseMap};

fn fmt_err(msg: impl Into<String>) -> Error {
    Error::Format(msg.into())
}

/// Evaluates a parameter expression.
pub fn parse_number(text: &str) -> Result<f64> {
    let mut p = ExprParser { s: text.as_bytes(), i: 0 };
    let v = p.sum()?;
    p.skip_ws();
    if p.i != p.s.len() {
        return Err(fmt_err(format!("unexpected trailing input in number `{text}`")));
    }
    if !v.is_finite() {
        return Err(fmt_err(format!("number `{text}` is not finite")));
    }
    Ok(v)
}

struct ExprParser<'a> {
    s: &'a [u8],
    i: usize,
}

impl ExprParser<'_> {
    fn skip_ws(&mut self) {
        while self.i < self.s.len() && self.s[self.i].is_ascii_whitespace() {
            self.i += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.s.get(self.i).copied()
    }

    fn sum(&mut self) -> Result<f64> {
        let mut v = self.product()?;
        while let Some(c @ (b'+' | b'-')) = self.peek() {
            self.i += 1;
            let r = self.product()?;
            v = if c == b'+' { v + r } else { v - r };
        }
        Ok(v)
    }

    fn product(&mut self) -> Result<f64> {
        let mut v = self.unary()?;
        while let Some(c @ (b'*' | b'/')) = self.peek() {
            self.i += 1;
            let r = self.unary()?;
            v = if c == b'*' { v * r } else { v / r };
        }
        Ok(v)
    }

    fn unary(&mut self) -> Result<f64> {
        match self.peek() {
            Some(b'-') => {
                self.i += 1;
                Ok(-self.unary()?)
            }
            Some(b'+') => {
                self.i += 1;
                self.unary()
            }
            _ => self.atom(),
        }
    }

    fn atom(&mut self) -> Result<f64> {
        let text = String::from_utf8_lossy(self.s).into_owned();
        match self.peek() {
            Some(b'(') => {
                self.i += 1;
                let v = self.sum()?;
                self.expect(b')', &text)?;
                Ok(v)
            }
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.i;
                while self.i < self.s.len() && self.s[self.i].is_ascii_alphanumeric() {
                    self.i += 1;
                }
                match &text[start..self.i] {
                    "pi" => Ok(PI),
                    "sqrt" => {
                        self.expect(b'(', &text)?;
                        let v = self.sum()?;
                        self.expect(b')', &text)?;
                        Ok(v.sqrt())
                    }
                    w => Err(fmt_err(format!("unknown name `{w}` in number `{text}`"))),
                }
            }
            Some(_) => {
                let start = self.i;
                while self.i < self.s.len() {
                    let c = self.s[self.i];
                    let exp_sign = (c == b'-' || c == b'+') && self.i > start && matches!(self.s[self.i - 1], b'e' | b'E');
                    if c.is_ascii_digit() || c == b'.' || c == b'e' || c == b'E' || exp_sign {
                        self.i += 1;
                    } else {
                        break;
                    }
                }
                text[start..self.i].parse().map_err(|_| fmt_err(format!("malformed number `{text}`")))
            }
            None => Err(fmt_err(format!("number `{text}` ends unexpectedly"))),
        }
    }

    fn expect(&mut self, c: u8, text: &str) -> Result<()> {
        if self.peek() == Some(c) {
            self.i += 1;
            Ok(())
        } else {
            Err(fmt_err(format!("expected `{}` in `{text}`", c as char)))
        }
    }
}

// Splits at commas outside parentheses.
fn split_args(s: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, c) in s.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                out.push(s[start..i].trim());
                start = i + 1;
            }
            _ => {}
        }
    }
    out.push(s[start..].trim());
    out
}

/// Parses a family expression such as `coherent(1, 0.5)` or `product(thermal(0.5), vacuum)`.
pub fn parse_family(text: &str) -> Result<Family> {
    let t = text.trim();
    let (name, args) = match t.find('(') {
        Some(open) => {
            if !t.ends_with(')') {
                return Err(fmt_err(format!("family `{t}` is missing its closing parenthesis")));
            }
            let inner = t[open + 1..t.len() - 1].trim();
            (t[..open].trim(), if inner.is_empty() { Vec::new() } else { split_args(inner) })
        }
        None => (t, Vec::new()),
    };
    if name == "product" {
        return Ok(Family::Product(args.iter().map(|a| parse_family(a)).collect::<Result<_>>()?));
    }
    let nums: Vec<f64> = args.iter().map(|a| parse_number(a)).collect::<Result<_>>()?;
    let arity = |lo: usize, hi: usize| {
        if (lo..=hi).contains(&nums.len()) {
            Ok(())
        } else {
            Err(fmt_err(format!("`{name}` takes {lo} to {hi} parameters, got {}", nums.len())))
        }
    };
    let get = |i: usize| nums.get(i).copied().unwrap_or(0.0);
    let family = match name {
        "vacuum" => {
            arity(0, 0)?;
            Family::Vacuum
        }
        "coherent" => {
            arity(1, 2)?;
            Family::Coherent(C64::new(get(0), get(1)))
        }
        "fock" => {
            arity(1, 1)?;
            let n = nums[0];
            if !(n >= 0.0 && n.fract() == 0.0) {
                return Err(fmt_err(format!("fock level must be a nonnegative integer, got {n}")));
            }
            Family::Fock(n as usize)
        }
        "thermal" => {
            arity(1, 1)?;
            Family::Thermal(nums[0])
        }
        "gaussian" => {
            arity(1, 5)?;
            let sy = if nums.len() >= 2 { nums[1] } else { nums[0] };
            Family::Gaussian { sx: nums[0], sy, phi: get(2), center: C64::new(get(3), get(4)) }
        }
        "manko_fock1" => {
            arity(1, 1)?;
            Family::MankoFock1(nums[0])
        }
        "two_mode_superposition" => {
            arity(2, 4)?;
            let (a, b) = if nums.len() == 4 {
                (C64::new(nums[0], nums[1]), C64::new(nums[2], nums[3]))
            } else if nums.len() == 2 {
                (C64::new(nums[0], 0.0), C64::new(nums[1], 0.0))
            } else {
                return Err(fmt_err("two_mode_superposition takes 2 real or 4 component parameters"));
            };
            Family::two_mode_superposition(a, b)?
        }
        _ => return Err(fmt_err(format!("unknown family `{name}`"))),
    };
    family.validate()?;
    Ok(family)
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Num {
    Int(i64),
    Float(f64),
    Expr(String),
}

impl Num {
    fn value(&self) -> Result<f64> {
        match self {
            Num::Int(i) => Ok(*i as f64),
            Num::Float(f) => Ok(*f),
            Num::Expr(s) => parse_number(s),
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum FamilyField {
    One(String),
    Many(Vec<String>),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    extent: Option<Vec<[Num; 2]>>,
    samples: Option<Vec<usize>>,
    values: Option<Vec<f64>>,
    values_file: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMap {
    kind: String,
    #[serde(default)]
    mode: usize,
    re: Option<Num>,
    im: Option<Num>,
    phi: Option<Num>,
    x: Option<Num>,
    y: Option<Num>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    modes: usize,
    kind: String,
    family: Option<FamilyField>,
    s: Option<Num>,
    scale: Option<Num>,
    grid: Option<RawGrid>,
    #[serde(default)]
    map: Vec<RawMap>,
}

fn opt(n: &Option<Num>, default: f64) -> Result<f64> {
    n.as_ref().map_or(Ok(default), Num::value)
}

fn parse_map(m: &RawMap) -> Result<PhaseMap> {
    let need = |n: &Option<Num>, field: &str| {
        n.as_ref().ok_or_else(|| fmt_err(format!("map `{}` needs `{field}`", m.kind))).and_then(Num::value)
    };
    let map = match m.kind.as_str() {
        "displacement" => PhaseMap::displacement(C64::new(opt(&m.re, 0.0)?, opt(&m.im, 0.0)?)),
        "rotation" => PhaseMap::rotation(need(&m.phi, "phi")?),
        "rescale" => PhaseMap::axis_rescale(need(&m.x, "x")?, need(&m.y, "y")?),
        "partial_transpose" => PhaseMap::partial_transpose(),
        k => return Err(fmt_err(format!("unknown map kind `{k}`"))),
    };
    Ok(if m.kind == "partial_transpose" && m.mode == 0 { map } else { map.on_mode(m.mode) })
}

fn read_values(path: &Path) -> Result<Vec<f64>> {
    if path.extension().is_some_and(|e| e == "bin") {
        let bytes = fs::read(path)?;
        if bytes.len() % 8 != 0 {
            return Err(fmt_err(format!("{} is not a whole number of f64 values", path.display())));
        }
        Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect())
    } else {
        fs::read_to_string(path)?
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| fmt_err(format!("bad value `{t}` in {}", path.display()))))
            .collect()
    }
}

fn family_of(raw: &RawSpec) -> Result<Option<Family>> {
    Ok(match &raw.family {
        None => None,
        Some(FamilyField::One(s)) => Some(parse_family(s)?),
        Some(FamilyField::Many(v)) => Some(Family::Product(v.iter().map(|s| parse_family(s)).collect::<Result<_>>()?)),
    })
}

/// Parses a spec document; relative `values_file` paths resolve against `base`.
pub fn parse_spec(text: &str, base: Option<&Path>) -> Result<DistributionSpec> {
    let raw: RawSpec = toml::from_str(text).map_err(|e| fmt_err(format!("spec file: {}", e.message())))?;
    if !(1..=2).contains(&raw.modes) {
        return Err(fmt_err(format!("modes must be 1 or 2, got {}", raw.modes)));
    }
    let family = family_of(&raw)?;
    let mut spec = match raw.kind.as_str() {
        "analytic" => {
            if raw.grid.is_some() {
                return Err(fmt_err("an analytic spec cannot carry a [grid] table"));
            }
            let f = family.ok_or_else(|| fmt_err("an analytic spec needs `family`"))?;
            DistributionSpec::analytic(f)?
        }
        "grid" => {
            let g = raw.grid.as_ref().ok_or_else(|| fmt_err("a grid spec needs a [grid] table"))?;
            let defaults = default_grid_axes(raw.modes);
            let samples = g.samples.clone().unwrap_or_else(|| defaults.iter().map(|a| a.n).collect());
            let extent: Vec<(f64, f64)> = match &g.extent {
                Some(e) => e.iter().map(|[lo, hi]| Ok((lo.value()?, hi.value()?))).collect::<Result<_>>()?,
                None => defaults.iter().map(|a| (a.lo, a.hi)).collect(),
            };
            if extent.len() != 2 * raw.modes || samples.len() != 2 * raw.modes {
                return Err(fmt_err(format!("a {}-mode grid needs {} extents and sample counts", raw.modes, 2 * raw.modes)));
            }
            let axes: Vec<Axis> = extent.iter().zip(&samples).map(|(&(lo, hi), &n)| Axis::new(lo, hi, n)).collect();
            let values = match (&g.values, &g.values_file) {
                (Some(_), Some(_)) => return Err(fmt_err("give either `values` or `values_file`, not both")),
                (Some(v), None) => Some(v.clone()),
                (None, Some(f)) => {
                    let p = base.map_or_else(|| Path::new(f).to_path_buf(), |b| b.join(f));
                    Some(read_values(&p)?)
                }
                (None, None) => None,
            };
            match (values, family) {
                (Some(v), None) => DistributionSpec::grid(raw.modes, Grid::new(axes, v)?)?,
                (None, Some(f)) => DistributionSpec::analytic(f)?.sample(axes)?,
                (Some(_), Some(_)) => return Err(fmt_err("a grid spec takes values or a family to sample, not both")),
                (None, None) => return Err(fmt_err("a grid spec needs values, values_file or a family to sample")),
            }
        }
        k => return Err(fmt_err(format!("kind must be `analytic` or `grid`, got `{k}`"))),
    };
    if spec.modes() != raw.modes {
        return Err(fmt_err(format!("declared {} modes but the distribution has {}", raw.modes, spec.modes())));
    }
    let s = opt(&raw.s, 0.0)?;
    let scale = opt(&raw.scale, 1.0)?;
    for m in &raw.map {
        spec = spec.apply_map(&parse_map(m)?).map_err(|e| match e {
            Error::Usage(msg) => Error::Format(msg),
            other => other,
        })?;
    }
    if scale != 1.0 {
        spec = spec.scaled(scale);
    }
    Ok(spec.with_s(s))
}

/// Reads a spec file, or parses `input` as an inline family expression when no such file exists.
pub fn load_spec(input: &str) -> Result<DistributionSpec> {
    let path = Path::new(input);
    if path.is_file() {
        let text = fs::read_to_string(path)?;
        parse_spec(&text, path.parent())
    } else if input.contains('(') || input.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
        parse_family(input).and_then(DistributionSpec::analytic).map_err(|e| match e {
            Error::Format(m) => Error::Format(format!("`{input}` is neither a readable file nor a family: {m}")),
            other => other,
        })
    } else {
        Err(Error::Io(std::io::Error::new(std::io::ErrorKind::NotFound, format!("{input}: no such file"))))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SpecBody;

    #[test]
    fn numbers() {
        assert_eq!(parse_number("0.5").unwrap(), 0.5);
        assert_eq!(parse_number("-2").unwrap(), -2.0);
        assert_eq!(parse_number("1e-3").unwrap(), 1e-3);
        assert_eq!(parse_number("2.5E+2").unwrap(), 250.0);
        assert!((parse_number("1/sqrt(2)").unwrap() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((parse_number("-pi/6").unwrap() + PI / 6.0).abs() < 1e-16);
        assert_eq!(parse_number("2*(1+3)").unwrap(), 8.0);
        for bad in ["", "1/", "sqrt 2", "foo", "1 2", "1/0"] {
            assert!(matches!(parse_number(bad), Err(Error::Format(_))), "{bad}");
        }
    }

    #[test]
    fn families() {
        assert_eq!(parse_family("vacuum").unwrap(), Family::Vacuum);
        assert_eq!(parse_family("coherent(1, 0.5)").unwrap(), Family::Coherent(C64::new(1.0, 0.5)));
        assert_eq!(parse_family("fock(3)").unwrap(), Family::Fock(3));
        assert_eq!(parse_family(" manko_fock1( 0.5 ) ").unwrap(), Family::MankoFock1(0.5));
        assert_eq!(
            parse_family("gaussian(0.25)").unwrap(),
            Family::Gaussian { sx: 0.25, sy: 0.25, phi: 0.0, center: C64::new(0.0, 0.0) }
        );
        let s = parse_family("two_mode_superposition(1/sqrt(2),0,1/sqrt(2),0)").unwrap();
        assert_eq!(s.modes(), 2);
        let p = parse_family("product(thermal(0.5), coherent(1))").unwrap();
        assert_eq!(p, Family::Product(vec![Family::Thermal(0.5), Family::Coherent(C64::new(1.0, 0.0))]));
        for bad in ["fock(1.5)", "thermal(-1)", "coherent()", "wigner(2)", "fock(1", "manko_fock1(0)"] {
            assert!(matches!(parse_family(bad), Err(Error::Format(_))), "{bad}");
        }
    }

    #[test]
    fn display_round_trips() {
        for f in [
            Family::Coherent(C64::new(1.0, 0.5)),
            Family::Gaussian { sx: 0.3, sy: 0.6, phi: 0.5, center: C64::new(1.0, 2.0) },
            Family::Product(vec![Family::Thermal(0.5), Family::Fock(2)]),
            Family::two_mode_superposition(C64::new(0.6, 0.0), C64::new(0.0, 0.8)).unwrap(),
        ] {
            assert_eq!(parse_family(&f.to_string()).unwrap(), f);
        }
    }

    #[test]
    fn analytic_document() {
        let text = r#"
            modes = 1
            kind = "analytic"
            family = "gaussian(0.3, 0.6)"
            s = -1
            [[map]]
            kind = "displacement"
            re = 1
            im = "sqrt(2)"
            [[map]]
            kind = "rotation"
            phi = "pi/4"
        "#;
        let spec = parse_spec(text, None).unwrap();
        assert_eq!(spec.s(), -1.0);
        let a = spec.as_analytic().unwrap();
        // Displacing then rotating moves the center to e^{iπ/4}β.
        let center = C64::from_polar(1.0, PI / 4.0) * C64::new(1.0, 2f64.sqrt());
        let z = a.maps[0].apply(center);
        assert!(z.norm() < 1e-15);
    }

    #[test]
    fn product_document_and_mode_check() {
        let ok = "modes = 2\nkind = \"analytic\"\nfamily = [\"vacuum\", \"thermal(1)\"]\n";
        assert_eq!(parse_spec(ok, None).unwrap().modes(), 2);
        let bad = "modes = 1\nkind = \"analytic\"\nfamily = [\"vacuum\", \"thermal(1)\"]\n";
        assert!(matches!(parse_spec(bad, None), Err(Error::Format(_))));
        let pt = "modes = 1\nkind = \"analytic\"\nfamily = \"vacuum\"\n[[map]]\nkind = \"partial_transpose\"\n";
        assert!(matches!(parse_spec(pt, None), Err(Error::Format(_))));
    }

    #[test]
    fn grid_documents() {
        let values: Vec<String> = (0..64).map(|i| format!("{}", i as f64 * 0.01)).collect();
        let text = format!(
            "modes = 1\nkind = \"grid\"\n[grid]\nextent = [[-1, 1], [-2, 2]]\nsamples = [8, 8]\nvalues = [{}]\n",
            values.join(", ")
        );
        let spec = parse_spec(&text, None).unwrap();
        match spec.body() {
            SpecBody::Grid(g) => {
                assert_eq!(g.axes[1], Axis::new(-2.0, 2.0, 8));
                assert_eq!(g.values[9], 0.09);
            }
            SpecBody::Analytic(_) => panic!("expected a grid"),
        }
        let sampled = "modes = 1\nkind = \"grid\"\nfamily = \"vacuum\"\n[grid]\nsamples = [65, 65]\n";
        let s = parse_spec(sampled, None).unwrap();
        assert!((s.evaluate(&[C64::new(0.0, 0.0)]).unwrap() - 2.0 / PI).abs() < 1e-12);
        let short = "modes = 1\nkind = \"grid\"\n[grid]\nsamples = [8, 8]\nvalues = [1.0, 2.0]\n";
        assert!(matches!(parse_spec(short, None), Err(Error::Format(_))));
    }

    #[test]
    fn values_files() {
        let dir = std::env::temp_dir().join(format!("wigner-check-spec-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let vals: Vec<f64> = (0..64).map(|i| i as f64).collect();
        fs::write(dir.join("w.txt"), vals.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("\n")).unwrap();
        fs::write(dir.join("w.bin"), vals.iter().flat_map(|v| v.to_le_bytes()).collect::<Vec<u8>>()).unwrap();
        for name in ["w.txt", "w.bin"] {
            let doc = format!("modes = 1\nkind = \"grid\"\n[grid]\nsamples = [8, 8]\nvalues_file = \"{name}\"\n");
            fs::write(dir.join("spec.toml"), doc).unwrap();
            let spec = load_spec(dir.join("spec.toml").to_str().unwrap()).unwrap();
            assert_eq!(spec.as_grid().unwrap().values, vals);
        }
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn inline_and_missing_inputs() {
        assert_eq!(load_spec("manko_fock1(0.5)").unwrap().modes(), 1);
        assert!(matches!(load_spec("does/not/exist.toml"), Err(Error::Io(_))));
        assert!(matches!(load_spec("nonsense(1)"), Err(Error::Format(_))));
    }

    #[test]
    fn unknown_fields_rejected() {
        let text = "modes = 1\nkind = \"analytic\"\nfamily = \"vacuum\"\ncolour = 3\n";
        assert!(matches!(parse_spec(text, None), Err(Error::Format(_))));
    }
}
