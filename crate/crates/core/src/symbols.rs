//! Uniform representation of analytic self-maps and weights on the disk.
//!
//! Maps are closed evaluators, not ASTs: the library constructions compose
//! exponentials, Möbius maps and fractional powers with no convenient
//! coefficient recursions.  Taylor data is extracted on demand by FFT on a
//! circle `|z| = ρ` and cached with its radius.  All fractional powers use
//! the principal branch; constructors only ever take powers of points off
//! `(−∞, 0]`.

use crate::error::{Error, Result};
use crate::geometry::BlaschkeProduct;
use crate::C64;
use rustfft::{num_complex::Complex, FftPlanner};
use std::fmt;
use std::sync::{Arc, OnceLock};

type Evaluator = Arc<dyn Fn(C64) -> C64 + Send + Sync>;

/// Structural tag of a symbol, used for exact fast paths and display.
#[derive(Debug, Clone)]
pub enum SymbolKind {
    /// Coefficients `c_0 + c_1 z + …`; enables exact coefficient arithmetic.
    Polynomial(Vec<C64>),
    Mobius,
    Blaschke,
    PowerWeight { beta: f64 },
    Kappa { s: f64 },
    Privalov { points: Vec<C64>, s: f64 },
    Outer,
    Composite,
    Sum,
    Product,
}

/// An analytic function on the unit disk with optional metadata.
#[derive(Clone)]
pub struct AnalyticMap {
    name: String,
    kind: SymbolKind,
    eval: Evaluator,
    sup_norm: Option<f64>,
    derivative: Option<Evaluator>,
    /// Stable boundary form: maps `1 − z` to `1 − f(z)`.  Lets pull-back
    /// machinery track boundary distances far below the `1 − x` float
    /// resolution for symbols with a closed displacement form.
    displacement: Option<Evaluator>,
    taylor_cache: Arc<OnceLock<TaylorSeries>>,
}

impl fmt::Debug for AnalyticMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AnalyticMap")
            .field("name", &self.name)
            .field("sup_norm", &self.sup_norm)
            .finish()
    }
}

impl AnalyticMap {
    pub fn new(name: impl Into<String>, kind: SymbolKind, eval: Evaluator) -> Self {
        AnalyticMap {
            name: name.into(),
            kind,
            eval,
            sup_norm: None,
            derivative: None,
            displacement: None,
            taylor_cache: Arc::new(OnceLock::new()),
        }
    }

    pub fn with_sup_norm(mut self, bound: f64) -> Self {
        self.sup_norm = Some(bound);
        self
    }

    pub fn with_derivative(mut self, d: Evaluator) -> Self {
        self.derivative = Some(d);
        self
    }

    pub fn with_displacement(mut self, d: Evaluator) -> Self {
        self.displacement = Some(d);
        self
    }

    /// `1 − f(z)` from `1 − z`, through the stable closed form when one is
    /// registered, by subtraction otherwise.
    pub fn displacement_eval(&self, one_minus_z: C64) -> C64 {
        match &self.displacement {
            Some(d) => d(one_minus_z),
            None => C64::new(1.0, 0.0) - (self.eval)(C64::new(1.0, 0.0) - one_minus_z),
        }
    }

    pub fn has_displacement_form(&self) -> bool {
        self.displacement.is_some()
    }

    pub fn eval(&self, z: C64) -> C64 {
        (self.eval)(z)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> &SymbolKind {
        &self.kind
    }

    pub fn sup_norm(&self) -> Option<f64> {
        self.sup_norm
    }

    pub fn derivative_at(&self, z: C64) -> Option<C64> {
        self.derivative.as_ref().map(|d| d(z))
    }

    pub fn polynomial_coefficients(&self) -> Option<&[C64]> {
        match &self.kind {
            SymbolKind::Polynomial(c) => Some(c),
            _ => None,
        }
    }

    // ---- constructors -------------------------------------------------

    pub fn polynomial(name: impl Into<String>, coeffs: Vec<C64>) -> Self {
        let mut coeffs = coeffs;
        while coeffs.len() > 1 && coeffs.last().map_or(false, |c| c.norm() == 0.0) {
            coeffs.pop();
        }
        let c = coeffs.clone();
        let eval: Evaluator = Arc::new(move |z| {
            let mut acc = C64::new(0.0, 0.0);
            for k in (0..c.len()).rev() {
                acc = acc * z + c[k];
            }
            acc
        });
        let dc: Vec<C64> = coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, c)| c * k as f64)
            .collect();
        let deriv: Evaluator = Arc::new(move |z| {
            let mut acc = C64::new(0.0, 0.0);
            for k in (0..dc.len()).rev() {
                acc = acc * z + dc[k];
            }
            acc
        });
        let bound = coeffs.iter().map(|c| c.norm()).sum();
        let mut map = Self::new(name, SymbolKind::Polynomial(coeffs.clone()), eval)
            .with_sup_norm(bound)
            .with_derivative(deriv);
        if coeffs.len() <= 64 {
            // q(u) = 1 − P(1 − u), exact coefficient transform.
            let mut q = vec![C64::new(0.0, 0.0); coeffs.len()];
            let mut pow = vec![C64::new(1.0, 0.0)]; // (1 − u)^k
            for c in &coeffs {
                for (j, p) in pow.iter().enumerate() {
                    q[j] += c * p;
                }
                let mut next = vec![C64::new(0.0, 0.0); pow.len() + 1];
                for (j, p) in pow.iter().enumerate() {
                    next[j] += p;
                    next[j + 1] -= p;
                }
                pow = next;
            }
            q[0] = C64::new(1.0, 0.0) - q[0];
            for item in q.iter_mut().skip(1) {
                *item = -*item;
            }
            map = map.with_displacement(Arc::new(move |u| {
                let mut acc = C64::new(0.0, 0.0);
                for k in (0..q.len()).rev() {
                    acc = acc * u + q[k];
                }
                acc
            }));
        }
        map
    }

    pub fn constant(c: C64) -> Self {
        Self::polynomial(format!("const({})", fmt_c(c)), vec![c])
    }

    pub fn identity() -> Self {
        Self::polynomial("id", vec![C64::new(0.0, 0.0), C64::new(1.0, 0.0)]).with_sup_norm(1.0)
    }

    /// The lens-type self-map `φ(z) = (1 + z)/2`.
    pub fn lens() -> Self {
        Self::polynomial("lens", vec![C64::new(0.5, 0.0), C64::new(0.5, 0.0)]).with_sup_norm(1.0)
    }

    /// `z ↦ λz`.
    pub fn scale(lambda: C64) -> Self {
        Self::polynomial(
            format!("scale({})", fmt_c(lambda)),
            vec![C64::new(0.0, 0.0), lambda],
        )
        .with_sup_norm(lambda.norm())
    }

    /// `z ↦ zⁿ`.
    pub fn monomial(n: usize) -> Self {
        let mut coeffs = vec![C64::new(0.0, 0.0); n + 1];
        coeffs[n] = C64::new(1.0, 0.0);
        Self::polynomial(format!("monomial({n})"), coeffs).with_sup_norm(1.0)
    }

    /// Power weight `w(z) = (1 − z)^β`, principal branch, `β > −1/2` so that
    /// `w ∈ H²`; `w(0) = 1`.
    pub fn power_weight(beta: f64) -> Result<Self> {
        if beta <= -0.5 {
            return Err(Error::invalid("beta", format!("{beta} ≤ −1/2")));
        }
        let eval: Evaluator = Arc::new(move |z| (C64::new(1.0, 0.0) - z).powf(beta));
        let deriv: Evaluator =
            Arc::new(move |z| -beta * (C64::new(1.0, 0.0) - z).powf(beta - 1.0));
        let mut map = Self::new(
            format!("powerweight(beta={beta})"),
            SymbolKind::PowerWeight { beta },
            eval,
        )
        .with_derivative(deriv);
        if beta >= 0.0 {
            map = map.with_sup_norm(2f64.powf(beta));
        }
        Ok(map)
    }

    /// The compact self-map `κ_s(z) = 1 − (1 − z)^s`, `0 < s < 1`.
    ///
    /// It fixes 0, has sup-norm 1 with sole boundary contact at `z = 1`, and
    /// `(1 − r)/(1 − |κ_s(r)|) = (1 − r)^{1−s} → 0` along the radius, so the
    /// induced composition operator is compact while `‖κ_s‖_∞ = 1`.
    pub fn kappa(s: f64) -> Result<Self> {
        if !(0.0 < s && s < 1.0) {
            return Err(Error::invalid("s", format!("{s} not in (0,1)")));
        }
        let eval: Evaluator =
            Arc::new(move |z| C64::new(1.0, 0.0) - (C64::new(1.0, 0.0) - z).powf(s));
        let deriv: Evaluator = Arc::new(move |z| s * (C64::new(1.0, 0.0) - z).powf(s - 1.0));
        Ok(
            Self::new(format!("kappa(s={s})"), SymbolKind::Kappa { s }, eval)
                .with_sup_norm(1.0)
                .with_derivative(deriv)
                .with_displacement(Arc::new(move |u: C64| u.powf(s))),
        )
    }

    /// Weight `w(z) = Π_j (1 − ξ̄_j z)^s` vanishing at the prescribed
    /// boundary points and nowhere else; the empty list gives `w ≡ 1`.
    pub fn finite_privalov_weight(points: &[C64], s: f64) -> Result<Self> {
        if s <= 0.0 {
            return Err(Error::invalid("s", format!("{s} must be positive")));
        }
        for p in points {
            if (p.norm() - 1.0).abs() > 1e-12 {
                return Err(Error::OffCircle { modulus: p.norm() });
            }
        }
        if points.is_empty() {
            return Ok(Self::constant(C64::new(1.0, 0.0)));
        }
        let pts = points.to_vec();
        let eval: Evaluator = Arc::new(move |z| {
            // exp(s Σ log(1 − ξ̄z)); each factor has positive real part.
            let log_sum: C64 = pts
                .iter()
                .map(|xi| (C64::new(1.0, 0.0) - xi.conj() * z).ln())
                .sum();
            (s * log_sum).exp()
        });
        let bound = 2f64.powf(s * points.len() as f64);
        Ok(Self::new(
            format!("privalov({} points, s={s})", points.len()),
            SymbolKind::Privalov {
                points: points.to_vec(),
                s,
            },
            eval,
        )
        .with_sup_norm(bound))
    }

    pub fn blaschke(product: BlaschkeProduct) -> Self {
        let name = format!("blaschke({} zeros)", product.zeros().len());
        let b = Arc::new(product);
        let eval: Evaluator = Arc::new(move |z| b.eval(z));
        Self::new(name, SymbolKind::Blaschke, eval).with_sup_norm(1.0)
    }

    pub fn mobius(map: crate::geometry::MobiusMap) -> Self {
        let eval: Evaluator = Arc::new(move |z| map.apply(z));
        Self::new("mobius", SymbolKind::Mobius, eval)
    }

    // ---- combinators ---------------------------------------------------

    /// Pointwise composition `self ∘ inner`.
    pub fn compose(&self, inner: &AnalyticMap) -> AnalyticMap {
        let f = self.eval.clone();
        let g = inner.eval.clone();
        let eval: Evaluator = Arc::new(move |z| f(g(z)));
        AnalyticMap::new(
            format!("{}∘{}", self.name, inner.name),
            SymbolKind::Composite,
            eval,
        )
        .with_sup_norm_opt(self.sup_norm)
    }

    pub fn product(&self, other: &AnalyticMap) -> AnalyticMap {
        if let (SymbolKind::Polynomial(a), SymbolKind::Polynomial(b)) = (&self.kind, &other.kind)
        {
            let coeffs = convolve(a, b);
            return AnalyticMap::polynomial(format!("{}×{}", self.name, other.name), coeffs);
        }
        let f = self.eval.clone();
        let g = other.eval.clone();
        let eval: Evaluator = Arc::new(move |z| f(z) * g(z));
        let bound = match (self.sup_norm, other.sup_norm) {
            (Some(a), Some(b)) => Some(a * b),
            _ => None,
        };
        let mut map = AnalyticMap::new(
            format!("{}×{}", self.name, other.name),
            SymbolKind::Product,
            eval,
        );
        if let Some(b) = bound {
            map = map.with_sup_norm(b);
        }
        map
    }

    pub fn sum(&self, other: &AnalyticMap) -> AnalyticMap {
        if let (SymbolKind::Polynomial(a), SymbolKind::Polynomial(b)) = (&self.kind, &other.kind)
        {
            let n = a.len().max(b.len());
            let mut coeffs = vec![C64::new(0.0, 0.0); n];
            for (k, c) in a.iter().enumerate() {
                coeffs[k] += c;
            }
            for (k, c) in b.iter().enumerate() {
                coeffs[k] += c;
            }
            return AnalyticMap::polynomial(format!("{}+{}", self.name, other.name), coeffs);
        }
        let f = self.eval.clone();
        let g = other.eval.clone();
        let eval: Evaluator = Arc::new(move |z| f(z) + g(z));
        let bound = match (self.sup_norm, other.sup_norm) {
            (Some(a), Some(b)) => Some(a + b),
            _ => None,
        };
        let mut map = AnalyticMap::new(
            format!("{}+{}", self.name, other.name),
            SymbolKind::Sum,
            eval,
        );
        if let Some(b) = bound {
            map = map.with_sup_norm(b);
        }
        map
    }

    /// Sum of many maps under one evaluator.
    pub fn sum_of(name: impl Into<String>, parts: Vec<AnalyticMap>) -> AnalyticMap {
        let evals: Vec<Evaluator> = parts.iter().map(|p| p.eval.clone()).collect();
        let bound = parts
            .iter()
            .map(|p| p.sup_norm)
            .try_fold(0.0, |acc, b| b.map(|b| acc + b));
        let eval: Evaluator = Arc::new(move |z| evals.iter().map(|e| e(z)).sum());
        let mut map = AnalyticMap::new(name, SymbolKind::Sum, eval);
        if let Some(b) = bound {
            map = map.with_sup_norm(b);
        }
        map
    }

    /// `f^δ = exp(δ log f)` for a map with values in the right half-plane.
    pub fn power_of_positive_real(&self, delta: f64) -> AnalyticMap {
        let f = self.eval.clone();
        let eval: Evaluator = Arc::new(move |z| {
            let v = f(z);
            debug_assert!(
                v.re > 0.0 || v.im != 0.0,
                "principal log hit the branch cut"
            );
            (delta * v.ln()).exp()
        });
        let mut map = AnalyticMap::new(
            format!("({})^{delta:.6}", self.name),
            SymbolKind::Composite,
            eval,
        );
        if let Some(b) = self.sup_norm {
            map = map.with_sup_norm(b.powf(delta));
        }
        map
    }

    fn with_sup_norm_opt(mut self, bound: Option<f64>) -> Self {
        self.sup_norm = bound;
        self
    }

    /// Cached Taylor extraction: the first request wins the cache; other
    /// parameter combinations are recomputed on the fly.
    pub fn taylor_cached(&self, n: usize, rho: f64) -> Result<TaylorSeries> {
        if let Some(ts) = self.taylor_cache.get() {
            if ts.coefficients.len() == n && ts.radius == rho {
                return Ok(ts.clone());
            }
            return taylor_coefficients(self, n, rho);
        }
        let ts = taylor_coefficients(self, n, rho)?;
        let _ = self.taylor_cache.set(ts.clone());
        Ok(ts)
    }
}

fn fmt_c(c: C64) -> String {
    if c.im == 0.0 {
        format!("{}", c.re)
    } else {
        format!("{}{:+}i", c.re, c.im)
    }
}

fn convolve(a: &[C64], b: &[C64]) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Truncated Taylor expansion with the extraction radius and a tail bound
/// valid on `|z| ≤ ρ/2`.
#[derive(Debug, Clone)]
pub struct TaylorSeries {
    pub coefficients: Vec<C64>,
    pub radius: f64,
    pub tail_bound: f64,
    pub truncated: bool,
}

impl TaylorSeries {
    pub fn eval(&self, z: C64) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for k in (0..self.coefficients.len()).rev() {
            acc = acc * z + self.coefficients[k];
        }
        acc
    }
}

/// Taylor coefficients `c_0 .. c_{n−1}` of `f`, by FFT of samples on the
/// circle `|z| = ρ` (exact for polynomials).
///
/// `c_k` is recovered as `FFT_k / (N ρ^k)`; when the `ρ^{−k}` rescaling
/// overflows, the series is truncated there and flagged.
pub fn taylor_coefficients(f: &AnalyticMap, n: usize, rho: f64) -> Result<TaylorSeries> {
    if !(0.0 < rho && rho < 1.0) {
        return Err(Error::invalid("rho", format!("{rho} not in (0,1)")));
    }
    if n == 0 {
        return Err(Error::invalid("n", "need at least one coefficient"));
    }
    if let Some(coeffs) = f.polynomial_coefficients() {
        let mut c = coeffs.to_vec();
        let truncated = c.len() > n;
        let tail_bound: f64 = if truncated {
            c[n..].iter().map(|x| x.norm()).sum()
        } else {
            0.0
        };
        c.resize(n, C64::new(0.0, 0.0));
        return Ok(TaylorSeries {
            coefficients: c,
            radius: rho,
            tail_bound,
            truncated,
        });
    }

    let m = (2 * n).next_power_of_two().max(256);
    let mut buf: Vec<Complex<f64>> = (0..m)
        .map(|j| {
            let z = C64::from_polar(rho, std::f64::consts::TAU * j as f64 / m as f64);
            let v = f.eval(z);
            Complex::new(v.re, v.im)
        })
        .collect();
    let max_abs = buf.iter().map(|c| c.norm()).fold(0.0f64, f64::max);
    FftPlanner::new().plan_fft_forward(m).process(&mut buf);

    let mut coefficients = Vec::with_capacity(n);
    let mut truncated = false;
    let mut scale = 1.0f64; // ρ^{−k}
    for item in buf.iter().take(n) {
        if scale > 1e280 {
            truncated = true;
            break;
        }
        let c = C64::new(item.re, item.im) * (scale / m as f64);
        if !c.re.is_finite() || !c.im.is_finite() {
            truncated = true;
            break;
        }
        coefficients.push(c);
        scale /= rho;
    }
    let k = coefficients.len();
    coefficients.resize(n, C64::new(0.0, 0.0));
    // Cauchy tail on |z| ≤ ρ/2 plus FFT roundoff.
    let tail_bound = max_abs * 2f64.powi(1 - k as i32) + 1e-13 * max_abs * (n as f64);
    Ok(TaylorSeries {
        coefficients,
        radius: rho,
        tail_bound,
        truncated,
    })
}

// ---------------------------------------------------------------------
// Symbol mini-language:  lens, kappa(s=0.5), powerweight(beta=0.6),
// blaschke(file=zeros.csv), privalov(thetas=0;1.57, s=1), scale(0.5),
// composed with ∘ (or @), × (or *), +.
// ---------------------------------------------------------------------

/// Parse a symbol/weight specification.
pub fn parse_symbol(src: &str) -> Result<AnalyticMap> {
    let tokens = lex(src)?;
    let mut parser = Parser { tokens, pos: 0 };
    let map = parser.expr()?;
    if parser.pos != parser.tokens.len() {
        return Err(Error::Parse(format!(
            "trailing input near token {:?}",
            parser.tokens[parser.pos]
        )));
    }
    Ok(map)
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Number(f64),
    Args(String),
    Plus,
    Times,
    Compose,
    LParen,
    RParen,
}

fn lex(src: &str) -> Result<Vec<Tok>> {
    let mut out = Vec::new();
    let chars: Vec<char> = src.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        match c {
            ' ' | '\t' | '\n' => i += 1,
            '+' => {
                out.push(Tok::Plus);
                i += 1;
            }
            '*' | '×' => {
                out.push(Tok::Times);
                i += 1;
            }
            '∘' | '@' => {
                out.push(Tok::Compose);
                i += 1;
            }
            '(' => {
                // Argument list if the previous token is an identifier,
                // grouping otherwise.
                if matches!(out.last(), Some(Tok::Ident(_))) {
                    let mut depth = 1;
                    let mut j = i + 1;
                    while j < chars.len() && depth > 0 {
                        match chars[j] {
                            '(' => depth += 1,
                            ')' => depth -= 1,
                            _ => {}
                        }
                        j += 1;
                    }
                    if depth != 0 {
                        return Err(Error::Parse("unbalanced parentheses".into()));
                    }
                    out.push(Tok::Args(chars[i + 1..j - 1].iter().collect()));
                    i = j;
                } else {
                    out.push(Tok::LParen);
                    i += 1;
                }
            }
            ')' => {
                out.push(Tok::RParen);
                i += 1;
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut j = i;
                while j < chars.len() && (chars[j].is_ascii_alphanumeric() || chars[j] == '_') {
                    j += 1;
                }
                out.push(Tok::Ident(chars[i..j].iter().collect()));
                i = j;
            }
            c if c.is_ascii_digit() || c == '-' || c == '.' => {
                let mut j = i + 1;
                while j < chars.len()
                    && (chars[j].is_ascii_digit()
                        || chars[j] == '.'
                        || chars[j] == 'e'
                        || chars[j] == 'E'
                        || ((chars[j] == '+' || chars[j] == '-')
                            && matches!(chars[j - 1], 'e' | 'E')))
                {
                    j += 1;
                }
                let text: String = chars[i..j].iter().collect();
                let v = text
                    .parse::<f64>()
                    .map_err(|_| Error::Parse(format!("bad number {text:?}")))?;
                out.push(Tok::Number(v));
                i = j;
            }
            other => return Err(Error::Parse(format!("unexpected character {other:?}"))),
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Tok>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos)
    }

    fn expr(&mut self) -> Result<AnalyticMap> {
        let mut acc = self.term()?;
        while matches!(self.peek(), Some(Tok::Plus)) {
            self.pos += 1;
            let rhs = self.term()?;
            acc = acc.sum(&rhs);
        }
        Ok(acc)
    }

    fn term(&mut self) -> Result<AnalyticMap> {
        let mut acc = self.factor()?;
        while matches!(self.peek(), Some(Tok::Times)) {
            self.pos += 1;
            let rhs = self.factor()?;
            acc = acc.product(&rhs);
        }
        Ok(acc)
    }

    fn factor(&mut self) -> Result<AnalyticMap> {
        let mut acc = self.atom()?;
        while matches!(self.peek(), Some(Tok::Compose)) {
            self.pos += 1;
            let rhs = self.atom()?;
            acc = acc.compose(&rhs);
        }
        Ok(acc)
    }

    fn atom(&mut self) -> Result<AnalyticMap> {
        match self.peek().cloned() {
            Some(Tok::Number(v)) => {
                self.pos += 1;
                Ok(AnalyticMap::constant(C64::new(v, 0.0)))
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                let inner = self.expr()?;
                match self.peek() {
                    Some(Tok::RParen) => {
                        self.pos += 1;
                        Ok(inner)
                    }
                    _ => Err(Error::Parse("expected ')'".into())),
                }
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                let args = if let Some(Tok::Args(a)) = self.peek().cloned() {
                    self.pos += 1;
                    parse_args(&a)?
                } else {
                    Vec::new()
                };
                construct(&name, &args)
            }
            other => Err(Error::Parse(format!("unexpected token {other:?}"))),
        }
    }
}

type Args = Vec<(Option<String>, String)>;

fn parse_args(src: &str) -> Result<Args> {
    let mut out = Vec::new();
    for piece in split_top_level(src, ',') {
        let piece = piece.trim();
        if piece.is_empty() {
            continue;
        }
        match piece.split_once('=') {
            Some((k, v)) => out.push((Some(k.trim().to_string()), v.trim().to_string())),
            None => out.push((None, piece.to_string())),
        }
    }
    Ok(out)
}

fn split_top_level(src: &str, sep: char) -> Vec<String> {
    let mut out = Vec::new();
    let mut depth = 0usize;
    let mut cur = String::new();
    for c in src.chars() {
        match c {
            '(' | '[' => {
                depth += 1;
                cur.push(c);
            }
            ')' | ']' => {
                depth = depth.saturating_sub(1);
                cur.push(c);
            }
            c if c == sep && depth == 0 => {
                out.push(std::mem::take(&mut cur));
            }
            c => cur.push(c),
        }
    }
    out.push(cur);
    out
}

fn arg_f64(args: &Args, key: &str) -> Result<f64> {
    for (k, v) in args {
        if k.as_deref() == Some(key) || k.is_none() {
            return v
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("bad value {v:?} for {key}")));
        }
    }
    Err(Error::Parse(format!("missing argument {key}")))
}

fn arg_str<'a>(args: &'a Args, key: &str) -> Option<&'a str> {
    args.iter()
        .find(|(k, _)| k.as_deref() == Some(key))
        .map(|(_, v)| v.as_str())
}

fn parse_complex(src: &str) -> Result<C64> {
    let s = src.trim();
    if let Some((r, theta)) = s.split_once('@') {
        let r: f64 = r
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad modulus in {s:?}")))?;
        let t: f64 = theta
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad angle in {s:?}")))?;
        return Ok(C64::from_polar(r, t));
    }
    if let Some(rest) = s.strip_suffix('i') {
        // forms: "bi", "a+bi", "a-bi"
        let rest = rest.trim();
        for split in (1..rest.len()).rev() {
            let (a, b) = rest.split_at(split);
            if (b.starts_with('+') || b.starts_with('-'))
                && !matches!(a.chars().last(), Some('e') | Some('E'))
            {
                if let (Ok(re), Ok(im)) = (a.parse::<f64>(), b.parse::<f64>()) {
                    return Ok(C64::new(re, im));
                }
            }
        }
        let im: f64 = if rest.is_empty() || rest == "+" {
            1.0
        } else if rest == "-" {
            -1.0
        } else {
            rest.parse()
                .map_err(|_| Error::Parse(format!("bad complex {s:?}")))?
        };
        return Ok(C64::new(0.0, im));
    }
    s.parse::<f64>()
        .map(|re| C64::new(re, 0.0))
        .map_err(|_| Error::Parse(format!("bad complex {s:?}")))
}

fn parse_complex_list(src: &str) -> Result<Vec<C64>> {
    src.trim()
        .trim_start_matches('[')
        .trim_end_matches(']')
        .split(';')
        .filter(|p| !p.trim().is_empty())
        .map(parse_complex)
        .collect()
}

fn read_zeros_csv(path: &str) -> Result<Vec<C64>> {
    let text = std::fs::read_to_string(path)?;
    let mut zeros = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("re") {
            continue;
        }
        let parts: Vec<&str> = line.split(',').map(str::trim).collect();
        match parts.as_slice() {
            [re, im] => {
                let re: f64 = re.parse().map_err(|_| {
                    Error::Parse(format!("bad zero on line {}", lineno + 1))
                })?;
                let im: f64 = im.parse().map_err(|_| {
                    Error::Parse(format!("bad zero on line {}", lineno + 1))
                })?;
                zeros.push(C64::new(re, im));
            }
            [re] => {
                let re: f64 = re.parse().map_err(|_| {
                    Error::Parse(format!("bad zero on line {}", lineno + 1))
                })?;
                zeros.push(C64::new(re, 0.0));
            }
            _ => return Err(Error::Parse(format!("bad zero on line {}", lineno + 1))),
        }
    }
    Ok(zeros)
}

fn construct(name: &str, args: &Args) -> Result<AnalyticMap> {
    match name {
        "one" | "unit" => Ok(AnalyticMap::constant(C64::new(1.0, 0.0))),
        "zero" => Ok(AnalyticMap::constant(C64::new(0.0, 0.0))),
        "id" | "identity" => Ok(AnalyticMap::identity()),
        "lens" => Ok(AnalyticMap::lens()),
        "const" => {
            let v = args
                .first()
                .map(|(_, v)| v.as_str())
                .ok_or_else(|| Error::Parse("const needs a value".into()))?;
            Ok(AnalyticMap::constant(parse_complex(v)?))
        }
        "scale" => {
            let v = arg_str(args, "r")
                .or_else(|| args.first().map(|(_, v)| v.as_str()))
                .ok_or_else(|| Error::Parse("scale needs a factor".into()))?;
            Ok(AnalyticMap::scale(parse_complex(v)?))
        }
        "monomial" => {
            let n = arg_f64(args, "n")? as usize;
            Ok(AnalyticMap::monomial(n))
        }
        "kappa" => AnalyticMap::kappa(arg_f64(args, "s")?),
        "powerweight" => AnalyticMap::power_weight(arg_f64(args, "beta")?),
        "privalov" => {
            let thetas = arg_str(args, "thetas")
                .ok_or_else(|| Error::Parse("privalov needs thetas=".into()))?;
            let s = arg_f64(args, "s").unwrap_or(1.0);
            let points: Vec<C64> = thetas
                .trim_start_matches('[')
                .trim_end_matches(']')
                .split(';')
                .filter(|p| !p.trim().is_empty())
                .map(|p| {
                    p.trim()
                        .parse::<f64>()
                        .map(|t| C64::from_polar(1.0, t))
                        .map_err(|_| Error::Parse(format!("bad angle {p:?}")))
                })
                .collect::<Result<_>>()?;
            AnalyticMap::finite_privalov_weight(&points, s)
        }
        "blaschke" => {
            let zeros = if let Some(path) = arg_str(args, "file") {
                read_zeros_csv(path)?
            } else if let Some(list) = arg_str(args, "zeros") {
                parse_complex_list(list)?
            } else {
                return Err(Error::Parse("blaschke needs file= or zeros=".into()));
            };
            Ok(AnalyticMap::blaschke(BlaschkeProduct::new(zeros)?))
        }
        "polynomial" => {
            let coeffs = arg_str(args, "coeffs")
                .ok_or_else(|| Error::Parse("polynomial needs coeffs=".into()))?;
            Ok(AnalyticMap::polynomial(
                "polynomial",
                parse_complex_list(coeffs)?,
            ))
        }
        other => Err(Error::Parse(format!("unknown constructor {other:?}"))),
    }
}
