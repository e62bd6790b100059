use crate::config::{Fig4Config, FringeConfig, MethodArg, RatesConfig, SweepConfig, TomographyConfig};
use crate::output::{csv_bytes, emit, json_bytes, num, Provenance};
use crate::Format;
use rayon::prelude::*;
use serde::Serialize;
use std::path::Path;
use stimpair::polarization::{
    bell_state, coincidence_probability, fit_fringe, phase_offset_for_peak_at, simulate_polarization_fringe,
    simulate_stimulation_fringe, ArmSetting, FitOptions, FitResult, FringeScan, MeasurementSetting,
    PhaseCoordinate, RateReference, StimulationModel,
};
use stimpair::resonator::{sweep_row, ResonatorConfig, SweepRow, SWEEP_COLUMNS};
use stimpair::tomography::{
    fidelity, product_settings, reconstruct_linear, reconstruct_mle, simulate_tomography_with, MleOptions,
    ReconstructionResult, TomographyRecord,
};
use stimpair::verify::{check_names, Report, Suite};
use stimpair::{Error, Result};

pub const SCAN_COLUMNS: [&str; 2] = ["scan_variable", "counts"];

fn check_shots(shots: f64) -> Result<f64> {
    if shots > 0.0 && shots.is_finite() {
        Ok(shots)
    } else {
        Err(Error::InvalidParameter(format!("--shots must be positive, got {shots}")))
    }
}

fn unsupported(command: &str, format: Format) -> Error {
    Error::InvalidParameter(format!("{command} does not support --format {format:?}"))
}

pub fn sweep_phase(cfg: &SweepConfig, format: Format, out: Option<&Path>) -> Result<()> {
    let configs = cfg.configs()?;
    let rows: Vec<SweepRow> = configs
        .par_iter()
        .map(|(phi, c)| sweep_row(cfg.multiplicity, c).map(|row| SweepRow { phi: *phi, ..row }))
        .collect::<Result<_>>()?;
    let prov = Provenance::new("sweep-phase", None, None, cfg);
    let bytes = match format {
        Format::Csv => {
            let cells: Vec<Vec<String>> = rows
                .iter()
                .map(|r| {
                    vec![
                        r.passes.to_string(),
                        num(r.phi),
                        num(r.tau),
                        r.multiplicity.to_string(),
                        num(r.p_exact),
                        num(r.p_approx),
                        num(r.contamination),
                    ]
                })
                .collect();
            csv_bytes(&prov, &SWEEP_COLUMNS, &cells)?
        }
        Format::Json => json_bytes(&serde_json::json!({ "provenance": prov, "rows": rows }))?,
        other => return Err(unsupported("sweep-phase", other)),
    };
    emit(out, &bytes)
}

/// Reads a two-column scan CSV; `#` lines are skipped.
pub fn read_scan(path: &Path) -> Result<FringeScan> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| scan_error(e, 0))?;
    let headers = reader.headers().map_err(|e| scan_error(e, 1))?.clone();
    if headers.iter().collect::<Vec<_>>() != SCAN_COLUMNS {
        let line = headers.position().map_or(1, |p| p.line());
        return Err(Error::Schema {
            line: line as usize,
            column: 1,
            message: format!("expected header {}, found {}", SCAN_COLUMNS.join(","), headers.iter().collect::<Vec<_>>().join(",")),
        });
    }
    let mut points = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| scan_error(e, 0))?;
        let line = record.position().map_or(0, |p| p.line()) as usize;
        if record.len() != 2 {
            return Err(Error::Schema {
                line,
                column: 1,
                message: format!("expected 2 fields, found {}", record.len()),
            });
        }
        let mut pair = [0.0; 2];
        for (k, field) in record.iter().enumerate() {
            pair[k] = field.parse().map_err(|_| Error::Schema {
                line,
                column: k + 1,
                message: format!("{:?} is not a number", field),
            })?;
        }
        points.push((pair[0], pair[1]));
    }
    FringeScan::new(points).map_err(|e| match e {
        Error::InvalidParameter(m) => Error::Schema {
            line: 0,
            column: 0,
            message: m,
        },
        other => other,
    })
}

fn scan_error(e: csv::Error, fallback_line: u64) -> Error {
    let line = e.position().map_or(fallback_line, |p| p.line()) as usize;
    match e.into_kind() {
        csv::ErrorKind::Io(io) => io.into(),
        other => Error::Schema {
            line,
            column: 0,
            message: format!("{other:?}"),
        },
    }
}

#[derive(Serialize)]
struct ScanOutput<'a> {
    provenance: &'a Provenance,
    points: &'a [(f64, f64)],
    #[serde(skip_serializing_if = "Option::is_none")]
    fit: Option<&'a FitResult>,
}

/// Writes the scan, fits it and writes the fit JSON.
///
/// The fit goes to `fit_out`, or to stderr when the scan itself was written
/// to stdout. A failed fit is reported after the scan has been written.
fn emit_scan_and_fit(
    prov: &Provenance,
    scan: &FringeScan,
    fit_options: &FitOptions,
    format: Format,
    out: Option<&Path>,
    fit_out: Option<&Path>,
) -> Result<()> {
    let fit = fit_fringe(scan, fit_options);
    let bytes = match format {
        Format::Csv => {
            let rows: Vec<Vec<String>> = scan.points().iter().map(|&(x, c)| vec![num(x), num(c)]).collect();
            csv_bytes(prov, &SCAN_COLUMNS, &rows)?
        }
        Format::Json => json_bytes(&ScanOutput {
            provenance: prov,
            points: scan.points(),
            fit: fit.as_ref().ok(),
        })?,
        other => return Err(unsupported(prov.command, other)),
    };
    emit(out, &bytes)?;
    let fit = fit?;
    let fit_json = json_bytes(&fit)?;
    match fit_out {
        Some(p) => emit(Some(p), &fit_json)?,
        None if format == Format::Csv || out.is_some() => eprint!("{}", String::from_utf8_lossy(&fit_json)),
        None => {}
    }
    Ok(())
}

/// Fits an existing scan and writes only the fit.
fn fit_input(path: &Path, options: &FitOptions, fit_out: Option<&Path>, out: Option<&Path>) -> Result<()> {
    let scan = read_scan(path)?;
    let fit = fit_fringe(&scan, options)?;
    emit(fit_out.or(out), &json_bytes(&fit)?)
}

pub struct ScanArgs<'a> {
    pub seed: u64,
    pub shots: f64,
    pub format: Format,
    pub out: Option<&'a Path>,
    pub fit_out: Option<&'a Path>,
    pub input: Option<&'a Path>,
}

pub fn fig4(cfg: &Fig4Config, args: &ScanArgs) -> Result<()> {
    let options = FitOptions {
        poisson_weights: true,
        ..FitOptions::with_coordinate(PhaseCoordinate::Tilt(cfg.geometry))
    };
    if let Some(input) = args.input {
        return fit_input(input, &options, args.fit_out, args.out);
    }
    let shots = check_shots(args.shots)?;
    let alphas = cfg.alpha.points()?;
    let phase_offset = match cfg.phase_offset {
        Some(v) if v.is_finite() => v,
        Some(v) => return Err(Error::InvalidParameter(format!("phase_offset must be finite, got {v}"))),
        None => phase_offset_for_peak_at(&cfg.geometry, cfg.peak_alpha)?,
    };
    let model = StimulationModel {
        geometry: cfg.geometry,
        resonator: ResonatorConfig::new(cfg.passes, 0.0, cfg.tau)?,
        phase_offset,
    };
    model.enhancement(alphas[0])?;
    let scan = if cfg.noiseless {
        let points = alphas
            .iter()
            .map(|&a| Ok((a, shots * model.enhancement(a)?)))
            .collect::<Result<_>>()?;
        FringeScan::new(points)?
    } else {
        simulate_stimulation_fringe(&model, &alphas, shots, args.seed)?
    };
    let prov = Provenance::new("fig4", Some(args.seed), Some(shots), cfg);
    emit_scan_and_fit(&prov, &scan, &options, args.format, args.out, args.fit_out)
}

pub fn fringe(cfg: &FringeConfig, args: &ScanArgs) -> Result<()> {
    let options = FitOptions::with_coordinate(PhaseCoordinate::PolarizerAngle);
    if let Some(input) = args.input {
        return fit_input(input, &options, args.fit_out, args.out);
    }
    let shots = check_shots(args.shots)?;
    let rho = cfg.state.density()?;
    cfg.fixed_arm.validate()?;
    let angles: Vec<f64> = cfg.scan_deg.points()?.into_iter().map(f64::to_radians).collect();
    let qwp = cfg.scan_qwp_deg.map(f64::to_radians);
    let scan = if cfg.noiseless {
        let points = angles
            .iter()
            .map(|&a| {
                let setting = MeasurementSetting::new(ArmSetting { pol: a, qwp }, cfg.fixed_arm);
                Ok((a, shots * coincidence_probability(&rho, &setting)?))
            })
            .collect::<Result<_>>()?;
        FringeScan::new(points)?
    } else {
        simulate_polarization_fringe(&rho, cfg.fixed_arm, qwp, &angles, shots, args.seed)?
    };
    let prov = Provenance::new("fringe", Some(args.seed), Some(shots), cfg);
    emit_scan_and_fit(&prov, &scan, &options, args.format, args.out, args.fit_out)
}

#[derive(Serialize)]
struct TomographyOutput<'a> {
    provenance: &'a Provenance,
    #[serde(flatten)]
    result: &'a ReconstructionResult,
    fidelity: f64,
}

pub struct TomographyArgs<'a> {
    pub seed: u64,
    pub shots: f64,
    pub format: Format,
    pub out: Option<&'a Path>,
    pub counts: Option<&'a Path>,
    pub record_out: Option<&'a Path>,
}

pub fn tomography(cfg: &TomographyConfig, args: &TomographyArgs) -> Result<()> {
    if args.format != Format::Json {
        return Err(unsupported("tomography", args.format));
    }
    let (record, prov) = match args.counts {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            let record = TomographyRecord::from_json(&text)?;
            let prov = Provenance::new("tomography", None, None, &serde_json::json!({
                "counts_file": path.display().to_string(),
                "method": cfg.method,
                "jeffreys": cfg.jeffreys,
            }));
            (record, prov)
        }
        None => {
            let shots = check_shots(args.shots)?;
            let settings = product_settings(&cfg.bases)?;
            if settings.len() != stimpair::tomography::SETTINGS_PER_RECORD {
                return Err(Error::InvalidParameter(format!(
                    "bases {:?} give {} settings, a record holds {}",
                    cfg.bases,
                    settings.len(),
                    stimpair::tomography::SETTINGS_PER_RECORD
                )));
            }
            let rho = cfg.state.density()?;
            let record = simulate_tomography_with(&rho, &settings, shots, args.seed)?;
            (record, Provenance::new("tomography", Some(args.seed), Some(shots), cfg))
        }
    };
    if let Some(path) = args.record_out {
        emit(Some(path), &json_bytes(&record)?)?;
    }
    let result = match cfg.method {
        MethodArg::Linear => reconstruct_linear(&record)?,
        MethodArg::Mle => reconstruct_mle(
            &record,
            &MleOptions {
                jeffreys: cfg.jeffreys,
                ..Default::default()
            },
        )?,
    };
    if result.negative_eigenvalue {
        log::warn!("estimate has a negative eigenvalue {:.3e}", result.min_eigenvalue);
    }
    let output = TomographyOutput {
        provenance: &prov,
        result: &result,
        fidelity: fidelity(&result.rho, &bell_state()),
    };
    emit(args.out, &json_bytes(&output)?)
}

#[derive(Serialize)]
struct RatesOutput {
    n: u32,
    singles: f64,
    coincidences: f64,
    rate: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    reported_pair_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    computed_over_reported: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    inconsistent: Option<bool>,
}

/// Relative mismatch above which a reported pair rate is flagged.
const RATE_MISMATCH: f64 = 0.1;

pub fn rates(cfg: &RatesConfig, format: Format, out: Option<&Path>) -> Result<()> {
    let rate = stimpair::polarization::nth_rate(cfg.singles, cfg.coincidences, cfg.n)?;
    let mut output = RatesOutput {
        n: cfg.n,
        singles: cfg.singles,
        coincidences: cfg.coincidences,
        rate,
        reported_pair_rate: None,
        computed_over_reported: None,
        inconsistent: None,
    };
    if let Some(reported) = cfg.reported_pair_rate {
        let reference = RateReference {
            singles: cfg.singles,
            coincidences: cfg.coincidences,
            reported_pair_rate: reported,
        };
        let ratio = reference.discrepancy()?;
        let inconsistent = reference.is_inconsistent(RATE_MISMATCH)?;
        if inconsistent {
            log::warn!("computed pair rate {:.4e} is {ratio:.4e} times the reported {reported:.4e}", reference.computed_pair_rate()?);
        }
        output.reported_pair_rate = Some(reported);
        output.computed_over_reported = Some(ratio);
        output.inconsistent = Some(inconsistent);
    }
    let prov = Provenance::new("rates", None, None, cfg);
    let bytes = match format {
        Format::Json => json_bytes(&serde_json::json!({ "provenance": prov, "result": output }))?,
        Format::Csv => {
            let opt = |v: Option<f64>| v.map(num).unwrap_or_default();
            let row = vec![
                output.n.to_string(),
                num(output.singles),
                num(output.coincidences),
                num(output.rate),
                opt(output.reported_pair_rate),
                opt(output.computed_over_reported),
                output.inconsistent.map(|b| b.to_string()).unwrap_or_default(),
            ];
            csv_bytes(
                &prov,
                &["n", "singles", "coincidences", "rate", "reported_pair_rate", "computed_over_reported", "inconsistent"],
                &[row],
            )?
        }
        other => return Err(unsupported("rates", other)),
    };
    emit(out, &bytes)
}

/// Runs the self-checks; `Ok(false)` when any check fails.
pub fn verify(checks: &[String], list: bool, format: Format, out: Option<&Path>) -> Result<bool> {
    if list {
        let names = check_names().join("\n") + "\n";
        emit(out, names.as_bytes())?;
        return Ok(true);
    }
    let names: Vec<&str> = checks.iter().map(String::as_str).collect();
    let report: Report = Suite::default().run(&names)?;
    let bytes = match format {
        Format::Text => format!("{report}\n").into_bytes(),
        Format::Json => json_bytes(&report)?,
        other => return Err(unsupported("verify", other)),
    };
    emit(out, &bytes)?;
    Ok(report.all_passed())
}
