//! The `SVR(C=42, epsilon=0.5, gamma='scale', kernel='rbf')` model-string
//! notation, plus the small grid and cross-validation flag syntaxes.
//!
//! Grammar: `Name ( [key = value {, key = value}] )` with arbitrary ASCII
//! whitespace between tokens. Values are decimal literals or single-quoted
//! strings. Names:
//!
//! - `SVR`: keys `C`, `epsilon`, `gamma`, `kernel`, `degree`, `coef0`.
//!   Omitted keys default to `C=1`, `epsilon=0.1`, `gamma='scale'`,
//!   `kernel='rbf'`, `degree=3`, `coef0=0`.
//! - `LinearRegression`: no keys.
//! - `Ridge`, `Lasso`: key `lambda` (alias `alpha`), default 1.
//! - `Polynomial`: key `degree`, default 2.
//!
//! [`format_model`] prints the canonical form, which always spells out `C`,
//! `epsilon`, `gamma` and `kernel`; `degree` and `coef0` appear for the
//! polynomial kernel or when they differ from their defaults.

use crate::baselines::{BaselineKind, BaselineSpec, DEFAULT_POLY_DEGREE};
use crate::error::{Error, Result};
use crate::kernels::{Gamma, KernelKind, KernelSpec, DEFAULT_COEF0, DEFAULT_DEGREE};
use crate::model::ModelSpec;
use crate::svm::SvmHyperParams;

pub const DEFAULT_C: f64 = 1.0;
pub const DEFAULT_EPSILON: f64 = 0.1;
pub const DEFAULT_LAMBDA: f64 = 1.0;
/// Upper bound on expanded grid sizes, so a typo cannot allocate gigabytes.
pub const MAX_GRID_LEN: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
enum Value {
    Number(f64, String),
    Str(String),
}

#[derive(Debug)]
struct Call {
    name: String,
    args: Vec<(String, Value, usize)>,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn skip_ws(&mut self) {
        while let Some(c) = self.peek() {
            if c.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Syntax {
            position: self.pos,
            message: message.into(),
        })
    }

    fn expect(&mut self, c: char) -> Result<()> {
        self.skip_ws();
        match self.peek() {
            Some(found) if found == c => {
                self.pos += 1;
                Ok(())
            }
            Some(found) => self.err(format!("expected '{c}', found '{found}'")),
            None => self.err(format!("expected '{c}', found end of input")),
        }
    }

    fn ident(&mut self) -> Result<String> {
        self.skip_ws();
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c.is_ascii_alphanumeric() || c == '_' {
                self.pos += 1;
            } else {
                break;
            }
        }
        if self.pos == start || !self.src.as_bytes()[start].is_ascii_alphabetic() {
            self.pos = start;
            return self.err("expected an identifier");
        }
        Ok(self.src[start..self.pos].to_string())
    }

    fn value(&mut self) -> Result<Value> {
        self.skip_ws();
        match self.peek() {
            Some('\'') => {
                self.pos += 1;
                let start = self.pos;
                loop {
                    match self.peek() {
                        Some('\'') => break,
                        Some(c) => self.pos += c.len_utf8(),
                        None => return self.err("unterminated string"),
                    }
                }
                let s = self.src[start..self.pos].to_string();
                self.pos += 1;
                Ok(Value::Str(s))
            }
            Some(c) if c.is_ascii_digit() || matches!(c, '+' | '-' | '.') => {
                let start = self.pos;
                while let Some(c) = self.peek() {
                    if c.is_ascii_digit() || matches!(c, '+' | '-' | '.' | 'e' | 'E') {
                        self.pos += 1;
                    } else {
                        break;
                    }
                }
                let text = &self.src[start..self.pos];
                match text.parse::<f64>() {
                    Ok(v) if v.is_finite() => Ok(Value::Number(v, text.to_string())),
                    _ => {
                        self.pos = start;
                        self.err(format!("malformed number '{text}'"))
                    }
                }
            }
            Some(c) => self.err(format!("expected a number or quoted string, found '{c}'")),
            None => self.err("expected a value, found end of input"),
        }
    }

    fn call(&mut self) -> Result<Call> {
        let name = self.ident()?;
        self.expect('(')?;
        let mut args = Vec::new();
        self.skip_ws();
        if self.peek() == Some(')') {
            self.pos += 1;
        } else {
            loop {
                self.skip_ws();
                let at = self.pos;
                let key = self.ident()?;
                self.expect('=')?;
                let value = self.value()?;
                args.push((key, value, at));
                self.skip_ws();
                match self.peek() {
                    Some(',') => self.pos += 1,
                    Some(')') => {
                        self.pos += 1;
                        break;
                    }
                    Some(c) => return self.err(format!("expected ',' or ')', found '{c}'")),
                    None => return self.err("expected ',' or ')', found end of input"),
                }
            }
        }
        self.skip_ws();
        if self.pos != self.src.len() {
            return self.err("trailing characters after ')'");
        }
        Ok(Call { name, args })
    }
}

fn number(key: &str, v: &Value) -> Result<f64> {
    match v {
        Value::Number(x, _) => Ok(*x),
        Value::Str(s) => Err(Error::BadValue(format!(
            "{key} expects a number, got '{s}'"
        ))),
    }
}

fn string<'v>(key: &str, v: &'v Value) -> Result<&'v str> {
    match v {
        Value::Str(s) => Ok(s),
        Value::Number(_, t) => Err(Error::BadValue(format!(
            "{key} expects a quoted string, got {t}"
        ))),
    }
}

fn integer(key: &str, v: &Value) -> Result<u32> {
    let x = number(key, v)?;
    if x.fract() != 0.0 || !(1.0..=64.0).contains(&x) {
        return Err(Error::BadValue(format!(
            "{key} must be an integer in 1..=64"
        )));
    }
    Ok(x as u32)
}

pub fn parse_gamma(s: &str) -> Result<Gamma> {
    match s {
        "scale" => Ok(Gamma::Scale),
        "auto" => Ok(Gamma::Auto),
        other => match other.trim().parse::<f64>() {
            Ok(g) if g > 0.0 && g.is_finite() => Ok(Gamma::Explicit(g)),
            Ok(_) => Err(Error::BadValue("gamma must be > 0".into())),
            Err(_) => Err(Error::BadValue(format!(
                "gamma must be 'scale', 'auto' or a positive number, got '{other}'"
            ))),
        },
    }
}

pub fn parse_kernel_kind(s: &str) -> Result<KernelKind> {
    match s {
        "linear" => Ok(KernelKind::Linear),
        "rbf" => Ok(KernelKind::Rbf),
        "poly" | "polynomial" => Ok(KernelKind::Polynomial),
        other => Err(Error::BadValue(format!(
            "unknown kernel '{other}' (expected linear, rbf or poly)"
        ))),
    }
}

fn check_duplicates(args: &[(String, Value, usize)]) -> Result<()> {
    for (i, (k, _, _)) in args.iter().enumerate() {
        if args[..i].iter().any(|(other, _, _)| other == k) {
            return Err(Error::BadValue(format!("duplicate key '{k}'")));
        }
    }
    Ok(())
}

fn svr_from_args(args: &[(String, Value, usize)]) -> Result<SvmHyperParams> {
    let mut c = DEFAULT_C;
    let mut epsilon = DEFAULT_EPSILON;
    let mut gamma = Gamma::Scale;
    let mut kind = KernelKind::Rbf;
    let mut degree = DEFAULT_DEGREE;
    let mut coef0 = DEFAULT_COEF0;
    for (key, value, _) in args {
        match key.as_str() {
            "C" => {
                c = number(key, value)?;
                if c <= 0.0 {
                    return Err(Error::BadValue("C must be > 0".into()));
                }
            }
            "epsilon" => {
                epsilon = number(key, value)?;
                if epsilon < 0.0 {
                    return Err(Error::BadValue("epsilon must be >= 0".into()));
                }
            }
            "gamma" => {
                gamma = match value {
                    Value::Str(s) if s == "scale" || s == "auto" => parse_gamma(s)?,
                    Value::Str(s) => {
                        return Err(Error::BadValue(format!(
                            "gamma must be 'scale', 'auto' or a number, got '{s}'"
                        )))
                    }
                    Value::Number(g, _) if *g > 0.0 => Gamma::Explicit(*g),
                    Value::Number(..) => return Err(Error::BadValue("gamma must be > 0".into())),
                }
            }
            "kernel" => kind = parse_kernel_kind(string(key, value)?)?,
            "degree" => degree = integer(key, value)?,
            "coef0" => coef0 = number(key, value)?,
            other => return Err(Error::UnknownKey(other.to_string())),
        }
    }
    let kernel = KernelSpec {
        kind,
        gamma,
        degree,
        coef0,
    };
    Ok(SvmHyperParams::new(c, epsilon, kernel))
}

fn baseline_from_args(kind: BaselineKind, args: &[(String, Value, usize)]) -> Result<BaselineSpec> {
    let mut spec = match kind {
        BaselineKind::Ols => BaselineSpec::ols(),
        BaselineKind::Ridge => BaselineSpec::ridge(DEFAULT_LAMBDA),
        BaselineKind::Lasso => BaselineSpec::lasso(DEFAULT_LAMBDA),
        BaselineKind::Polynomial => BaselineSpec::polynomial(DEFAULT_POLY_DEGREE),
    };
    for (key, value, _) in args {
        match (kind, key.as_str()) {
            (BaselineKind::Ridge | BaselineKind::Lasso, "lambda" | "alpha") => {
                spec.lambda = number(key, value)?;
                if spec.lambda < 0.0 {
                    return Err(Error::BadValue("lambda must be >= 0".into()));
                }
            }
            (BaselineKind::Polynomial, "degree") => spec.degree = integer(key, value)?,
            (_, other) => return Err(Error::UnknownKey(other.to_string())),
        }
    }
    Ok(spec)
}

pub fn parse_model_string(s: &str) -> Result<ModelSpec> {
    let call = Lexer { src: s, pos: 0 }.call()?;
    check_duplicates(&call.args)?;
    match call.name.as_str() {
        "SVR" => Ok(ModelSpec::Svr(svr_from_args(&call.args)?)),
        "LinearRegression" => Ok(ModelSpec::Baseline(baseline_from_args(
            BaselineKind::Ols,
            &call.args,
        )?)),
        "Ridge" => Ok(ModelSpec::Baseline(baseline_from_args(
            BaselineKind::Ridge,
            &call.args,
        )?)),
        "Lasso" => Ok(ModelSpec::Baseline(baseline_from_args(
            BaselineKind::Lasso,
            &call.args,
        )?)),
        "Polynomial" => Ok(ModelSpec::Baseline(baseline_from_args(
            BaselineKind::Polynomial,
            &call.args,
        )?)),
        other => Err(Error::Syntax {
            position: 0,
            message: format!("unknown model '{other}'"),
        }),
    }
}

/// SVR-only convenience over [`parse_model_string`].
pub fn parse_svr_string(s: &str) -> Result<SvmHyperParams> {
    match parse_model_string(s)? {
        ModelSpec::Svr(hp) => Ok(hp),
        ModelSpec::Baseline(_) => Err(Error::BadValue(format!(
            "expected an SVR(...) model, got '{s}'"
        ))),
    }
}

fn format_gamma(g: Gamma) -> String {
    match g {
        Gamma::Scale => "'scale'".into(),
        Gamma::Auto => "'auto'".into(),
        Gamma::Explicit(v) => format!("{v}"),
    }
}

pub fn format_svr(hp: &SvmHyperParams) -> String {
    let k = &hp.kernel;
    let mut out = format!(
        "SVR(C={}, epsilon={}, gamma={}, kernel='{}'",
        hp.c,
        hp.epsilon,
        format_gamma(k.gamma),
        k.kind.name()
    );
    let poly = k.kind == KernelKind::Polynomial;
    if poly || k.degree != DEFAULT_DEGREE {
        out.push_str(&format!(", degree={}", k.degree));
    }
    if poly || k.coef0 != DEFAULT_COEF0 {
        out.push_str(&format!(", coef0={}", k.coef0));
    }
    out.push(')');
    out
}

pub fn format_baseline(b: &BaselineSpec) -> String {
    match b.kind {
        BaselineKind::Ols => "LinearRegression()".into(),
        BaselineKind::Ridge => format!("Ridge(lambda={})", b.lambda),
        BaselineKind::Lasso => format!("Lasso(lambda={})", b.lambda),
        BaselineKind::Polynomial => format!("Polynomial(degree={})", b.degree),
    }
}

pub fn format_model(spec: &ModelSpec) -> String {
    match spec {
        ModelSpec::Svr(hp) => format_svr(hp),
        ModelSpec::Baseline(b) => format_baseline(b),
    }
}

/// Parsed `--grid-C` value. Non-positive entries are dropped and reported.
#[derive(Debug, Clone, PartialEq)]
pub struct CGrid {
    pub values: Vec<f64>,
    pub skipped: Vec<f64>,
}

/// `start:end:step` (inclusive of `end` up to rounding) or a comma list.
pub fn parse_c_grid(s: &str) -> Result<CGrid> {
    let raw = if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(Error::BadValue(format!(
                "range '{s}' must be start:end:step"
            )));
        }
        let nums = parts
            .iter()
            .map(|p| parse_real(p))
            .collect::<Result<Vec<f64>>>()?;
        let (start, end, step) = (nums[0], nums[1], nums[2]);
        if step <= 0.0 {
            return Err(Error::BadValue("range step must be > 0".into()));
        }
        if end < start {
            return Err(Error::BadValue("range end must be >= start".into()));
        }
        let count = ((end - start) / step + 1e-9).floor() + 1.0;
        if !(count <= MAX_GRID_LEN as f64) {
            return Err(Error::BadValue(format!(
                "range '{s}' expands past {MAX_GRID_LEN} values"
            )));
        }
        (0..count as usize)
            .map(|i| start + step * i as f64)
            .collect()
    } else {
        parse_list(s, parse_real)?
    };
    let (values, skipped) = raw.into_iter().partition(|c| *c > 0.0);
    let grid = CGrid { values, skipped };
    if grid.values.is_empty() {
        return Err(Error::BadValue("C grid has no positive values".into()));
    }
    Ok(grid)
}

fn parse_real(s: &str) -> Result<f64> {
    match s.trim().parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::BadValue(format!(
            "'{}' is not a finite number",
            s.trim()
        ))),
    }
}

/// Comma-separated list through `item`; empty entries are rejected.
pub fn parse_list<T>(s: &str, item: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    let out = s
        .split(',')
        .map(|p| {
            let p = p.trim();
            if p.is_empty() {
                Err(Error::BadValue("empty list entry".into()))
            } else {
                item(p)
            }
        })
        .collect::<Result<Vec<T>>>()?;
    if out.len() > MAX_GRID_LEN {
        return Err(Error::BadValue("list too long".into()));
    }
    Ok(out)
}

pub fn parse_epsilons(s: &str) -> Result<Vec<f64>> {
    parse_list(s, |p| {
        let v = parse_real(p)?;
        if v < 0.0 {
            return Err(Error::BadValue("epsilon must be >= 0".into()));
        }
        Ok(v)
    })
}

pub fn parse_gammas(s: &str) -> Result<Vec<Gamma>> {
    parse_list(s, |p| parse_gamma(p.trim_matches('\'')))
}

pub fn parse_kernels(s: &str) -> Result<Vec<KernelKind>> {
    parse_list(s, |p| parse_kernel_kind(p.trim_matches('\'')))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CvChoice {
    LeaveOneOut,
    KFold(usize),
}

/// `loo` or `k:<int>`.
pub fn parse_cv(s: &str) -> Result<CvChoice> {
    let s = s.trim();
    if s == "loo" {
        return Ok(CvChoice::LeaveOneOut);
    }
    match s.strip_prefix("k:").map(|k| k.parse::<usize>()) {
        Some(Ok(k)) if k >= 2 => Ok(CvChoice::KFold(k)),
        Some(Ok(_)) => Err(Error::BadValue("k must be >= 2".into())),
        _ => Err(Error::BadValue(format!(
            "cv must be 'loo' or 'k:<int>', got '{s}'"
        ))),
    }
}
