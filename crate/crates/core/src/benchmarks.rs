//! Synthetic test functions with known optima, the two-mode toy problem,
//! and a line protocol for external black boxes.

use std::f64::consts::PI;
use std::io::{BufRead, BufReader, Read, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    Minimize,
    Maximize,
}

/// Anything the optimisation loop can query.
pub trait Objective {
    fn name(&self) -> &str;
    fn bounds(&self) -> &[(f64, f64)];
    fn sense(&self) -> Sense;
    fn known_optimum(&self) -> Option<f64>;
    fn evaluate(&mut self, x: &[f64]) -> Result<f64>;

    fn dim(&self) -> usize {
        self.bounds().len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    StybTang,
    Rosenbrock,
    Hartmann6,
    ToyGmmPaper,
    ToyGmmFigure,
}

/// A synthetic benchmark over a box.
#[derive(Debug, Clone, PartialEq)]
pub struct Benchmark {
    name: String,
    kind: Kind,
    bounds: Vec<(f64, f64)>,
}

pub const BENCHMARK_NAMES: &[&str] = &["stybtang", "rosenbrock", "hartmann6", "hartmann6+14", "toy_gmm_paper", "toy_gmm_figure"];

/// Minimiser of the one-dimensional Styblinski–Tang term.
pub const STYBTANG_ARGMIN: f64 = -2.903_534_027_771_177;
/// Minimum of `½(x⁴ − 16x² + 5x)`.
pub const STYBTANG_MIN_PER_DIM: f64 = -39.166_165_703_771_41;
pub const HARTMANN6_MIN: f64 = -3.322_368_011_415_512_5;
pub const HARTMANN6_ARGMIN: [f64; 6] = [
    0.201_689_509_234_095_84,
    0.150_010_688_764_179_22,
    0.476_873_972_432_962_2,
    0.275_332_428_312_954,
    0.311_651_611_575_136_7,
    0.657_300_529_380_464_1,
];

const H6_ALPHA: [f64; 4] = [1.0, 1.2, 3.0, 3.2];
const H6_A: [[f64; 6]; 4] = [
    [10.0, 3.0, 17.0, 3.5, 1.7, 8.0],
    [0.05, 10.0, 17.0, 0.1, 8.0, 14.0],
    [3.0, 3.5, 1.7, 10.0, 17.0, 8.0],
    [17.0, 8.0, 0.05, 10.0, 0.1, 14.0],
];
const H6_P: [[f64; 6]; 4] = [
    [0.1312, 0.1696, 0.5569, 0.0124, 0.8283, 0.5886],
    [0.2329, 0.4135, 0.8307, 0.3736, 0.1004, 0.9991],
    [0.2348, 0.1451, 0.3522, 0.2883, 0.3047, 0.6650],
    [0.4047, 0.8828, 0.8732, 0.5743, 0.1091, 0.0381],
];

// Toy problem: correlated bump at (800, 800), separable bumps at 300.
const TOY_MU1: [f64; 2] = [800.0, 800.0];
const TOY_S1: [[f64; 2]; 2] = [[20000.0, 15000.0], [15000.0, 20000.0]];
const TOY_MU2: f64 = 300.0;
const TOY_VAR2: f64 = 10000.0;

fn toy_quad(x: f64, y: f64) -> f64 {
    let (dx, dy) = (x - TOY_MU1[0], y - TOY_MU1[1]);
    let det = TOY_S1[0][0] * TOY_S1[1][1] - TOY_S1[0][1] * TOY_S1[1][0];
    (TOY_S1[1][1] * dx * dx - 2.0 * TOY_S1[0][1] * dx * dy + TOY_S1[0][0] * dy * dy) / det
}

fn toy_paper(x: &[f64]) -> f64 {
    let det = TOY_S1[0][0] * TOY_S1[1][1] - TOY_S1[0][1] * TOY_S1[1][0];
    let n2 = (-0.5 * toy_quad(x[0], x[1])).exp() / (2.0 * PI * det.sqrt());
    let n1 = |v: f64| (-0.5 * (v - TOY_MU2).powi(2) / TOY_VAR2).exp() / (2.0 * PI * TOY_VAR2).sqrt();
    n2 / 6.0 + 2.5 / 6.0 * n1(x[0]) + 2.5 / 6.0 * n1(x[1])
}

fn toy_figure(x: &[f64]) -> f64 {
    let bump = |v: f64| (-0.5 * (v - TOY_MU2).powi(2) / TOY_VAR2).exp();
    0.6 * (-0.5 * toy_quad(x[0], x[1])).exp() + 0.2 * bump(x[0]) + 0.2 * bump(x[1])
}

fn stybtang(x: &[f64]) -> f64 {
    0.5 * x.iter().map(|v| v.powi(4) - 16.0 * v * v + 5.0 * v).sum::<f64>()
}

fn rosenbrock(x: &[f64]) -> f64 {
    x.windows(2)
        .map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (1.0 - w[0]).powi(2))
        .sum()
}

fn hartmann6(x: &[f64]) -> f64 {
    -H6_ALPHA
        .iter()
        .zip(H6_A.iter().zip(&H6_P))
        .map(|(a, (row_a, row_p))| {
            let s: f64 = (0..6).map(|j| row_a[j] * (x[j] - row_p[j]).powi(2)).sum();
            a * (-s).exp()
        })
        .sum::<f64>()
}

impl Benchmark {
    /// `d` is ignored for fixed-size problems other than checking it.
    pub fn new(name: &str, d: usize) -> Result<Self> {
        let (kind, bounds) = match name {
            "stybtang" if d >= 1 => (Kind::StybTang, vec![(-5.0, 5.0); d]),
            "rosenbrock" if d >= 2 => (Kind::Rosenbrock, vec![(-5.0, 10.0); d]),
            "hartmann6" if d >= 6 => (Kind::Hartmann6, vec![(0.0, 1.0); d]),
            "hartmann6+14" if d == 20 => (Kind::Hartmann6, vec![(0.0, 1.0); d]),
            "toy_gmm_paper" if d == 3 => (Kind::ToyGmmPaper, vec![(0.0, 1000.0); 3]),
            "toy_gmm_figure" if d == 3 => (Kind::ToyGmmFigure, vec![(0.0, 1000.0); 3]),
            n if BENCHMARK_NAMES.contains(&n) => {
                return Err(Error::invalid(format!("benchmark `{n}` does not support d = {d}")))
            }
            n => return Err(Error::invalid(format!("unknown benchmark `{n}`"))),
        };
        Ok(Self { name: name.to_string(), kind, bounds })
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.bounds.len() {
            return Err(Error::invalid(format!("{} expects {} coordinates, got {}", self.name, self.bounds.len(), x.len())));
        }
        for (i, (v, (lo, hi))) in x.iter().zip(&self.bounds).enumerate() {
            if !(v >= lo && v <= hi) {
                return Err(Error::invalid(format!("coordinate {} = {v} outside [{lo}, {hi}]", i + 1)));
            }
        }
        Ok(match self.kind {
            Kind::StybTang => stybtang(x),
            Kind::Rosenbrock => rosenbrock(x),
            Kind::Hartmann6 => hartmann6(&x[..6]),
            Kind::ToyGmmPaper => toy_paper(x),
            Kind::ToyGmmFigure => toy_figure(x),
        })
    }

    /// A point attaining [`Objective::known_optimum`].
    pub fn optimizer(&self) -> Vec<f64> {
        let d = self.bounds.len();
        match self.kind {
            Kind::StybTang => vec![STYBTANG_ARGMIN; d],
            Kind::Rosenbrock => vec![1.0; d],
            Kind::Hartmann6 => {
                let mut x = vec![0.5; d];
                x[..6].copy_from_slice(&HARTMANN6_ARGMIN);
                x
            }
            Kind::ToyGmmPaper => vec![TOY_MU2, TOY_MU2, 0.0],
            Kind::ToyGmmFigure => vec![TOY_MU1[0], TOY_MU1[1], 0.0],
        }
    }
}

impl Objective for Benchmark {
    fn name(&self) -> &str {
        &self.name
    }

    fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    fn sense(&self) -> Sense {
        match self.kind {
            Kind::ToyGmmPaper | Kind::ToyGmmFigure => Sense::Maximize,
            _ => Sense::Minimize,
        }
    }

    fn known_optimum(&self) -> Option<f64> {
        let d = self.bounds.len() as f64;
        Some(match self.kind {
            Kind::StybTang => STYBTANG_MIN_PER_DIM * d,
            Kind::Rosenbrock => 0.0,
            Kind::Hartmann6 => HARTMANN6_MIN,
            // mode values; the tails of the other bumps shift the true
            // maximiser by far less than a grid step
            Kind::ToyGmmPaper => toy_paper(&self.optimizer()),
            Kind::ToyGmmFigure => toy_figure(&self.optimizer()),
        })
    }

    fn evaluate(&mut self, x: &[f64]) -> Result<f64> {
        self.eval(x)
    }
}

/// Evaluates a named synthetic benchmark; the dimension is `x.len()`.
pub fn eval_benchmark(name: &str, x: &[f64]) -> Result<f64> {
    Benchmark::new(name, x.len())?.eval(x)
}

pub fn known_optimum(name: &str, d: usize) -> Result<f64> {
    match Benchmark::new(name, d) {
        Ok(b) => b.known_optimum().ok_or_else(|| Error::UnknownOptimum(name.to_string())),
        Err(_) if !BENCHMARK_NAMES.contains(&name) => Err(Error::UnknownOptimum(name.to_string())),
        Err(e) => Err(e),
    }
}

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(60);

/// A long-lived child process answering one request line with one reply
/// line: `x_1 x_2 .. x_d\n` → `y\n`.
pub struct ExternalBlackBox {
    child: Child,
    stdin: ChildStdin,
    replies: Receiver<std::io::Result<String>>,
    stderr: Arc<Mutex<String>>,
    timeout: Duration,
}

impl ExternalBlackBox {
    pub fn spawn(command: &[String], timeout: Duration) -> Result<Self> {
        let (program, args) = command
            .split_first()
            .ok_or_else(|| Error::invalid("empty black-box command"))?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| Error::BlackBox { message: format!("failed to start `{program}`: {e}"), output: String::new() })?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let mut err_pipe = child.stderr.take().expect("piped stderr");

        let (tx, replies) = mpsc::channel();
        std::thread::spawn(move || {
            let mut reader = BufReader::new(stdout);
            loop {
                let mut line = String::new();
                match reader.read_line(&mut line) {
                    Ok(0) => break,
                    Ok(_) => {
                        if tx.send(Ok(line)).is_err() {
                            break;
                        }
                    }
                    Err(e) => {
                        let _ = tx.send(Err(e));
                        break;
                    }
                }
            }
        });
        let stderr = Arc::new(Mutex::new(String::new()));
        let sink = Arc::clone(&stderr);
        std::thread::spawn(move || {
            let mut buf = [0u8; 4096];
            while let Ok(n) = err_pipe.read(&mut buf) {
                if n == 0 {
                    break;
                }
                sink.lock().expect("stderr lock").push_str(&String::from_utf8_lossy(&buf[..n]));
            }
        });
        Ok(Self { child, stdin, replies, stderr, timeout })
    }

    fn failure(&self, message: impl Into<String>) -> Error {
        // give the stderr reader a moment to drain
        std::thread::sleep(Duration::from_millis(20));
        Error::BlackBox { message: message.into(), output: self.stderr.lock().expect("stderr lock").clone() }
    }

    pub fn query(&mut self, x: &[f64]) -> Result<f64> {
        let line = format_request(x);
        if let Err(e) = self.stdin.write_all(line.as_bytes()).and_then(|_| self.stdin.flush()) {
            return Err(self.failure(format!("write to black box failed: {e}")));
        }
        match self.replies.recv_timeout(self.timeout) {
            Ok(Ok(reply)) => parse_reply(&reply).map_err(|m| self.failure(m)),
            Ok(Err(e)) => Err(self.failure(format!("read from black box failed: {e}"))),
            Err(RecvTimeoutError::Timeout) => {
                let _ = self.child.kill();
                Err(Error::Timeout(self.timeout))
            }
            Err(RecvTimeoutError::Disconnected) => {
                let status = self.child.wait().map(|s| s.to_string()).unwrap_or_default();
                Err(self.failure(format!("black box exited ({status}) without replying")))
            }
        }
    }
}

impl Drop for ExternalBlackBox {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Space-separated shortest round-trip decimals, newline-terminated.
pub fn format_request(x: &[f64]) -> String {
    let mut s = x.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(" ");
    s.push('\n');
    s
}

pub fn parse_reply(line: &str) -> std::result::Result<f64, String> {
    let trimmed = line.trim();
    let v: f64 = trimmed.parse().map_err(|_| format!("non-numeric reply `{trimmed}`"))?;
    if !v.is_finite() {
        return Err(format!("non-finite reply `{trimmed}`"));
    }
    Ok(v)
}

/// One-shot evaluation through a freshly spawned process.
pub fn external_blackbox(command: &[String], x: &[f64], timeout: Duration) -> Result<f64> {
    ExternalBlackBox::spawn(command, timeout)?.query(x)
}

/// An external process plus the box and sense it is optimised over.
pub struct ExternalObjective {
    name: String,
    process: ExternalBlackBox,
    bounds: Vec<(f64, f64)>,
    sense: Sense,
    optimum: Option<f64>,
}

impl ExternalObjective {
    pub fn new(name: &str, command: &[String], bounds: Vec<(f64, f64)>, sense: Sense, optimum: Option<f64>, timeout: Duration) -> Result<Self> {
        if bounds.is_empty() || bounds.iter().any(|(lo, hi)| !(lo < hi)) {
            return Err(Error::invalid("external black box needs non-empty bounds with lo < hi"));
        }
        Ok(Self { name: name.to_string(), process: ExternalBlackBox::spawn(command, timeout)?, bounds, sense, optimum })
    }
}

impl Objective for ExternalObjective {
    fn name(&self) -> &str {
        &self.name
    }
    fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }
    fn sense(&self) -> Sense {
        self.sense
    }
    fn known_optimum(&self) -> Option<f64> {
        self.optimum
    }
    fn evaluate(&mut self, x: &[f64]) -> Result<f64> {
        self.process.query(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn stybtang_origin_and_optimum() {
        assert_eq!(eval_benchmark("stybtang", &[0.0; 7]).unwrap(), 0.0);
        let b = Benchmark::new("stybtang", 10).unwrap();
        assert_relative_eq!(b.known_optimum().unwrap(), -391.6599, epsilon = 0.01);
        assert_relative_eq!(b.eval(&b.optimizer()).unwrap(), b.known_optimum().unwrap(), max_relative = 1e-14);
    }

    #[test]
    fn stybtang_per_dim_minimum_by_grid_search() {
        // dense grid, then local refinement by golden section
        let f = |x: f64| 0.5 * (x.powi(4) - 16.0 * x * x + 5.0 * x);
        let (mut best_x, mut best) = (0.0, f64::INFINITY);
        for i in 0..=100_000 {
            let x = -5.0 + 1e-4 * i as f64;
            if f(x) < best {
                best = f(x);
                best_x = x;
            }
        }
        let (mut a, mut b) = (best_x - 1e-4, best_x + 1e-4);
        for _ in 0..100 {
            let m1 = a + (b - a) / 3.0;
            let m2 = b - (b - a) / 3.0;
            if f(m1) < f(m2) {
                b = m2
            } else {
                a = m1
            }
        }
        assert!((0.5 * (a + b) - STYBTANG_ARGMIN).abs() < 1e-6);
        assert!((f(0.5 * (a + b)) - STYBTANG_MIN_PER_DIM).abs() < 1e-9);
    }

    #[test]
    fn rosenbrock_minimum() {
        assert_eq!(eval_benchmark("rosenbrock", &[1.0; 20]).unwrap(), 0.0);
        assert_eq!(known_optimum("rosenbrock", 5).unwrap(), 0.0);
        assert!(eval_benchmark("rosenbrock", &[0.0; 4]).unwrap() > 0.0);
    }

    #[test]
    fn hartmann_optimum_is_local_minimum() {
        let b = Benchmark::new("hartmann6", 6).unwrap();
        let x = b.optimizer();
        let f0 = b.eval(&x).unwrap();
        assert!((f0 - HARTMANN6_MIN).abs() < 1e-9);
        for j in 0..6 {
            for h in [1e-3, -1e-3] {
                let mut y = x.clone();
                y[j] += h;
                assert!(b.eval(&y).unwrap() >= f0 - 1e-12);
            }
        }
    }

    #[test]
    fn hartmann_padding_is_inert() {
        let b = Benchmark::new("hartmann6+14", 20).unwrap();
        let mut x = b.optimizer();
        let f0 = b.eval(&x).unwrap();
        for v in x.iter_mut().skip(6) {
            *v = 0.123;
        }
        assert_eq!(b.eval(&x).unwrap(), f0);
        assert_eq!(known_optimum("hartmann6+14", 20).unwrap(), known_optimum("hartmann6", 6).unwrap());
    }

    #[test]
    fn toy_paper_values() {
        let a = eval_benchmark("toy_gmm_paper", &[300.0, 300.0, 17.0]).unwrap();
        let b = eval_benchmark("toy_gmm_paper", &[800.0, 800.0, 999.0]).unwrap();
        assert_relative_eq!(a, 3.3245e-3, max_relative = 1e-4);
        assert_relative_eq!(b, 2.0176e-6, max_relative = 1e-4);
        // z is redundant
        assert_eq!(a, eval_benchmark("toy_gmm_paper", &[300.0, 300.0, 600.0]).unwrap());
    }

    #[test]
    fn toy_figure_has_correlated_global_mode() {
        let top = eval_benchmark("toy_gmm_figure", &[800.0, 800.0, 0.0]).unwrap();
        let local = eval_benchmark("toy_gmm_figure", &[300.0, 300.0, 0.0]).unwrap();
        assert!(top > 0.6 && top < 0.6 + 1e-5);
        assert!(local < 0.41);
        assert_eq!(Benchmark::new("toy_gmm_figure", 3).unwrap().sense(), Sense::Maximize);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(eval_benchmark("stybtang", &[6.0]).is_err());
        assert!(eval_benchmark("nope", &[0.0]).is_err());
        assert!(Benchmark::new("toy_gmm_figure", 2).is_err());
        assert!(matches!(known_optimum("my-external", 4), Err(Error::UnknownOptimum(_))));
    }

    #[test]
    fn deterministic() {
        let x = [0.3, -1.2, 4.4, 2.2];
        assert_eq!(eval_benchmark("stybtang", &x).unwrap().to_bits(), eval_benchmark("stybtang", &x).unwrap().to_bits());
    }

    #[test]
    fn request_format_and_reply_parse() {
        assert_eq!(format_request(&[0.1, 2.0, -3.5]), "0.1 2.0 -3.5\n");
        assert_eq!(parse_reply("  4.25\n"), Ok(4.25));
        assert_eq!(parse_reply("1e-3\n"), Ok(1e-3));
        assert!(parse_reply("nan\n").is_err());
        assert!(parse_reply("hello\n").is_err());
    }
}
