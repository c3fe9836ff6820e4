use std::collections::BTreeMap;
use std::io::{Read, Write};

use crackband_core::asymptotics::{
    fit_leading_coefficient, prop2_inner, AsymptoticPrediction, CONSISTENT_CONSTANT, STATED_CONSTANT,
};
use crackband_core::cell::{assert_simple, neumann_eigenpairs};
use crackband_core::fd::oracle_band;
use crackband_core::green::bloch_trace;
use crackband_core::pencil::{band_sweep, theta_grid, BandEntry, BandTable, DispersionPoint, Method};
use crackband_core::{Error, ModeIndex};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::CliError;

pub const BAND_HEADER: [&str; 6] = ["theta", "epsilon", "method", "E_numeric", "E_asymptotic", "residual"];

/// Seventeen significant digits; non-finite values print as `nan`.
pub fn format_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        "nan".into()
    }
}

fn csv_writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out)
}

fn csv_io(e: csv::Error) -> CliError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::Io(io),
        other => CliError::Compute(format!("{other:?}")),
    }
}

pub fn modes(cfg: &RunConfig, out: impl Write) -> Result<(), CliError> {
    if cfg.count == 0 {
        return Err(CliError::Config("field `count`: must be at least 1".into()));
    }
    let cell = cfg.spectral_cell()?;
    let pairs = neumann_eigenpairs(&cell, cfg.count).map_err(|e| CliError::Config(e.to_string()))?;
    let mut w = csv_writer(out);
    w.write_record(["index", "m", "n", "E", "uA0", "uA1", "simple"]).map_err(csv_io)?;
    for (i, (mode, pair)) in pairs.iter().enumerate() {
        let simple = assert_simple(&cell, *mode, 1.0).is_ok();
        w.write_record([
            i.to_string(),
            mode.m.to_string(),
            mode.n.to_string(),
            format_float(pair.energy),
            format_float(pair.u_a0),
            format_float(pair.u_a1),
            simple.to_string(),
        ])
        .map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

/// Rows ordered by theta, then epsilon, then method.
pub fn band_entries(cfg: &RunConfig) -> Result<Vec<BandEntry>, CliError> {
    let cell = cfg.cell(cfg.epsilons[0])?;
    let thetas = theta_grid(cfg.theta_points);
    let methods = cfg.method.methods();
    let pencil_methods: Vec<Method> = methods.iter().copied().filter(|m| *m != Method::FdOracle).collect();
    let pencil = band_sweep(&cell, &cfg.epsilons, cfg.mode, &thetas, cfg.order, &pencil_methods);
    let oracle: Vec<BandTable> = match cfg.h {
        Some(h) if methods.contains(&Method::FdOracle) => cfg
            .epsilons
            .iter()
            .map(|&eps| Ok(oracle_band(&cfg.cell(eps)?, eps, &thetas, h)))
            .collect::<Result<_, CliError>>()?,
        _ => Vec::new(),
    };

    let ne = cfg.epsilons.len();
    let np = pencil_methods.len();
    let mut rows = Vec::with_capacity(thetas.len() * ne * methods.len());
    for ti in 0..thetas.len() {
        for ei in 0..ne {
            let mut pi = 0;
            for &method in &methods {
                if method == Method::FdOracle {
                    rows.push(oracle[ei].entries[ti].clone());
                } else {
                    rows.push(pencil.entries[(ti * ne + ei) * np + pi].clone());
                    pi += 1;
                }
            }
        }
    }
    Ok(rows)
}

/// Writes the whole table and returns how many points failed.
pub fn write_band(rows: &[BandEntry], out: impl Write) -> Result<usize, CliError> {
    let mut w = csv_writer(out);
    w.write_record(BAND_HEADER).map_err(csv_io)?;
    let mut failures = 0;
    for row in rows {
        let (e, residual) = match &row.outcome {
            Ok(p) => (p.e_numeric, p.residual),
            Err(err) => {
                failures += 1;
                eprintln!(
                    "warning: theta {} epsilon {} method {}: {err}",
                    row.theta,
                    row.epsilon,
                    row.method.as_str()
                );
                (f64::NAN, f64::NAN)
            }
        };
        w.write_record([
            format_float(row.theta),
            format_float(row.epsilon),
            row.method.as_str().to_string(),
            format_float(e),
            format_float(row.e_asymptotic),
            format_float(residual),
        ])
        .map_err(csv_io)?;
    }
    w.flush()?;
    Ok(failures)
}

/// Parses a band CSV back into entries; failed rows keep their place as errors.
pub fn read_band(input: impl Read) -> Result<Vec<BandEntry>, CliError> {
    let mut r = csv::ReaderBuilder::new().from_reader(input);
    let headers = r.headers().map_err(|e| CliError::Input(e.to_string()))?.clone();
    let mut index = [0usize; 6];
    for (slot, name) in index.iter_mut().zip(BAND_HEADER) {
        *slot = headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| CliError::Input(format!("missing column `{name}`")))?;
    }
    let mut rows = Vec::new();
    for (i, record) in r.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| CliError::Input(format!("line {line}: {e}")))?;
        let cell = |k: usize| record.get(index[k]).unwrap_or("").trim();
        let num = |k: usize| -> Result<f64, CliError> {
            cell(k).parse::<f64>().map_err(|_| {
                CliError::Input(format!("line {line}, column `{}`: not a number: {:?}", BAND_HEADER[k], cell(k)))
            })
        };
        let theta = num(0)?;
        let epsilon = num(1)?;
        let method: Method = cell(2)
            .parse()
            .map_err(|e: Error| CliError::Input(format!("line {line}, column `method`: {e}")))?;
        let e_numeric = num(3)?;
        let e_asymptotic = num(4)?;
        let residual = num(5)?;
        let outcome = if e_numeric.is_finite() {
            Ok(DispersionPoint { theta, epsilon, e_numeric, method, residual, iterations: 0 })
        } else {
            Err(Error::InvalidArgument("failed point in input".into()))
        };
        rows.push(BandEntry { theta, epsilon, method, e_asymptotic, outcome });
    }
    Ok(rows)
}

#[derive(Debug, Serialize)]
pub struct FitRow {
    pub method: Method,
    pub theta: f64,
    pub samples: usize,
    pub c1_fitted: f64,
    pub c1_theory: f64,
    pub c2_fitted: f64,
    pub rms: f64,
    /// Null when the predicted coefficient vanishes.
    pub relative_error: Option<f64>,
    pub c1_consistent: f64,
    pub relative_error_consistent: Option<f64>,
    pub measured_constant: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct FitReport {
    pub height: f64,
    pub mode: ModeIndex,
    pub stated_constant: f64,
    pub consistent_constant: f64,
    pub rows: Vec<FitRow>,
}

fn relative(fitted: f64, theory: f64) -> Option<f64> {
    (theory != 0.0).then(|| (fitted - theory).abs() / theory.abs())
}

pub fn fit(cfg: &RunConfig, entries: Vec<BandEntry>) -> Result<FitReport, CliError> {
    let cell = cfg.spectral_cell()?;
    let prediction = AsymptoticPrediction::new(&cell, cfg.mode);
    let mut groups: BTreeMap<Method, Vec<f64>> = BTreeMap::new();
    for e in &entries {
        let thetas = groups.entry(e.method).or_default();
        if !thetas.iter().any(|t| t.to_bits() == e.theta.to_bits()) {
            thetas.push(e.theta);
        }
    }
    let mut rows = Vec::new();
    for (method, thetas) in groups {
        let table = BandTable {
            height: cfg.height,
            mode: cfg.mode,
            entries: entries.iter().filter(|e| e.method == method).cloned().collect(),
        };
        for theta in thetas {
            let f = fit_leading_coefficient(&table, theta).map_err(|e| {
                CliError::Input(format!("method {} theta {theta}: {e}", method.as_str()))
            })?;
            let jump = prediction.junction_jump(theta);
            let c1_theory = STATED_CONSTANT * jump;
            let c1_consistent = CONSISTENT_CONSTANT * jump;
            rows.push(FitRow {
                method,
                theta,
                samples: f.samples,
                c1_fitted: f.c1,
                c1_theory,
                c2_fitted: f.c2,
                rms: f.rms,
                relative_error: relative(f.c1, c1_theory),
                c1_consistent,
                relative_error_consistent: relative(f.c1, c1_consistent),
                measured_constant: (jump != 0.0).then(|| f.c1 / jump),
            });
        }
    }
    Ok(FitReport {
        height: cfg.height,
        mode: cfg.mode,
        stated_constant: STATED_CONSTANT,
        consistent_constant: CONSISTENT_CONSTANT,
        rows,
    })
}

#[derive(Debug, Serialize)]
pub struct Prop2Row {
    pub epsilon: f64,
    pub inner_times_log_eps: f64,
    pub trace_at_zero_sq: f64,
    pub deviation: f64,
}

#[derive(Debug, Serialize)]
pub struct Prop2Report {
    pub height: f64,
    pub mode: ModeIndex,
    pub theta: f64,
    pub order: usize,
    pub rows: Vec<Prop2Row>,
}

pub fn prop2(cfg: &RunConfig) -> Result<Prop2Report, CliError> {
    let cell = cfg.spectral_cell()?;
    let target = bloch_trace(cfg.height, cfg.mode, cfg.theta, 0.0).norm_sqr();
    let rows = cfg
        .epsilons
        .iter()
        .map(|&eps| {
            let inner = prop2_inner(&cell, cfg.theta, eps, cfg.mode, cfg.order)
                .map_err(|e| CliError::Compute(format!("epsilon {eps}: {e}")))?;
            let scaled = inner.re * eps.ln() + 0.0;
            Ok(Prop2Row { epsilon: eps, inner_times_log_eps: scaled, trace_at_zero_sq: target, deviation: (scaled - target).abs() })
        })
        .collect::<Result<_, CliError>>()?;
    Ok(Prop2Report { height: cfg.height, mode: cfg.mode, theta: cfg.theta, order: cfg.order, rows })
}
