//! CSV readers and writers for densities, sweeps, roots and trajectories.
//!
//! Floats are written in scientific notation with 17 significant digits, so
//! every value round-trips exactly. Rows end in a bare LF.

use std::io::{self, Read, Write};

use crate::density::PhaseDensity;
use crate::lyapunov::{SignChange, SweepOutput};
use crate::sim::Trajectory;

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out)
}

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(input)
}

fn to_io(e: csv::Error) -> io::Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => e,
        other => io::Error::new(io::ErrorKind::InvalidData, format!("{other:?}")),
    }
}

fn parse_f64(field: &str) -> io::Result<f64> {
    field
        .trim()
        .parse()
        .map_err(|_| io::Error::new(io::ErrorKind::InvalidData, format!("not a number: {field:?}")))
}

fn parse_opt(field: &str) -> io::Result<Option<f64>> {
    if field.trim().is_empty() {
        Ok(None)
    } else {
        parse_f64(field).map(Some)
    }
}

/// `theta,p`
pub fn write_density<W: Write>(out: W, p: &PhaseDensity) -> io::Result<()> {
    let mut w = writer(out);
    w.write_record(["theta", "p"]).map_err(to_io)?;
    for (t, v) in p.grid().iter().zip(p.values()) {
        w.write_record([fmt_f64(*t), fmt_f64(*v)]).map_err(to_io)?;
    }
    w.flush()
}

pub fn read_density<R: Read>(input: R) -> io::Result<Vec<(f64, f64)>> {
    let mut rows = Vec::new();
    for rec in reader(input).records() {
        let rec = rec.map_err(to_io)?;
        rows.push((parse_f64(&rec[0])?, parse_f64(&rec[1])?));
    }
    Ok(rows)
}

/// `param,lambda,method,stderr`; `lambda` is empty at gaps and `stderr` is
/// empty for methods without one.
pub fn write_sweep<W: Write>(out: W, sweep: &SweepOutput) -> io::Result<()> {
    let mut w = writer(out);
    w.write_record(["param", "lambda", "method", "stderr"]).map_err(to_io)?;
    let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
    for pt in &sweep.points {
        w.write_record([
            fmt_f64(pt.param),
            opt(pt.lambda),
            sweep.method.name().to_string(),
            opt(pt.standard_error),
        ])
        .map_err(to_io)?;
    }
    w.flush()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub param: f64,
    pub lambda: Option<f64>,
    pub method: String,
    pub stderr: Option<f64>,
}

pub fn read_sweep<R: Read>(input: R) -> io::Result<Vec<SweepRow>> {
    let mut rows = Vec::new();
    for rec in reader(input).records() {
        let rec = rec.map_err(to_io)?;
        rows.push(SweepRow {
            param: parse_f64(&rec[0])?,
            lambda: parse_opt(&rec[1])?,
            method: rec[2].to_string(),
            stderr: parse_opt(&rec[3])?,
        });
    }
    Ok(rows)
}

/// `param_lo,param_hi,root_estimate`
pub fn write_roots<W: Write>(out: W, roots: &[SignChange]) -> io::Result<()> {
    let mut w = writer(out);
    w.write_record(["param_lo", "param_hi", "root_estimate"]).map_err(to_io)?;
    for r in roots {
        w.write_record([fmt_f64(r.lo), fmt_f64(r.hi), fmt_f64(r.root)]).map_err(to_io)?;
    }
    w.flush()
}

pub fn read_roots<R: Read>(input: R) -> io::Result<Vec<SignChange>> {
    let mut rows = Vec::new();
    for rec in reader(input).records() {
        let rec = rec.map_err(to_io)?;
        rows.push(SignChange {
            lo: parse_f64(&rec[0])?,
            hi: parse_f64(&rec[1])?,
            root: parse_f64(&rec[2])?,
        });
    }
    Ok(rows)
}

/// `n,t,x1,x2`, followed by `# truncated_at=<n>` for truncated paths.
pub fn write_trajectory<W: Write>(mut out: W, traj: &Trajectory) -> io::Result<()> {
    {
        let mut w = writer(&mut out);
        w.write_record(["n", "t", "x1", "x2"]).map_err(to_io)?;
        for ((n, t), x) in traj.indices.iter().zip(&traj.times).zip(&traj.states) {
            w.write_record([n.to_string(), fmt_f64(*t), fmt_f64(x[0]), fmt_f64(x[1])])
                .map_err(to_io)?;
        }
        w.flush()?;
    }
    if let Some(n) = traj.truncated_at {
        writeln!(out, "# truncated_at={n}")?;
    }
    out.flush()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryFile {
    pub rows: Vec<(usize, f64, f64, f64)>,
    pub truncated_at: Option<usize>,
}

pub fn read_trajectory<R: Read>(mut input: R) -> io::Result<TrajectoryFile> {
    let mut text = String::new();
    input.read_to_string(&mut text)?;
    let truncated_at = text
        .lines()
        .filter_map(|l| l.strip_prefix("# truncated_at="))
        .next_back()
        .map(|v| {
            v.trim()
                .parse()
                .map_err(|_| io::Error::new(io::ErrorKind::InvalidData, "bad truncated_at"))
        })
        .transpose()?;
    let mut rows = Vec::new();
    for rec in reader(text.as_bytes()).records() {
        let rec = rec.map_err(to_io)?;
        let n = rec[0]
            .parse()
            .map_err(|_| io::Error::new(io::ErrorKind::InvalidData, "bad step index"))?;
        rows.push((n, parse_f64(&rec[1])?, parse_f64(&rec[2])?, parse_f64(&rec[3])?));
    }
    Ok(TrajectoryFile { rows, truncated_at })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::{density_rotation_closed_form, Domain};
    use crate::lyapunov::{SweepMethod, SweepParam, SweepPoint};
    use crate::model::{linearize, GameParams};
    use crate::sim::Scheme;

    #[test]
    fn floats_keep_full_precision() {
        for v in [0.1, -1.0 / 3.0, 1e-300, 6.02e23, 0.0, -0.0] {
            let s = fmt_f64(v);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits(), "{s}");
        }
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
    }

    #[test]
    fn density_round_trip() {
        let g = GameParams::with_rotation(0.2, 2.0, 0.2, 0.4, 2.0, 2.0).unwrap();
        let coeffs = crate::angular::AngularCoeffs::new(linearize(&g));
        let p = density_rotation_closed_form(&coeffs, 2.0, 2.0, 64).unwrap();
        assert_eq!(p.domain(), Domain::Full);
        let mut buf = Vec::new();
        write_density(&mut buf, &p).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("theta,p\n"));
        assert!(!text.contains('\r'));
        let rows = read_density(buf.as_slice()).unwrap();
        assert_eq!(rows.len(), 65);
        for ((t, v), (gt, gv)) in rows.iter().zip(p.grid().iter().zip(p.values())) {
            assert_eq!((t, v), (gt, gv));
        }
    }

    #[test]
    fn sweep_and_roots_round_trip_with_gaps() {
        let sweep = SweepOutput {
            param: SweepParam::Beta,
            method: SweepMethod::MonteCarlo,
            points: vec![
                SweepPoint { param: -0.1, lambda: Some(-0.25), standard_error: Some(0.01), gap: None },
                SweepPoint { param: 0.0, lambda: None, standard_error: None, gap: Some("x".into()) },
            ],
        };
        let mut buf = Vec::new();
        write_sweep(&mut buf, &sweep).unwrap();
        let rows = read_sweep(buf.as_slice()).unwrap();
        assert_eq!(rows[0], SweepRow { param: -0.1, lambda: Some(-0.25), method: "monte-carlo".into(), stderr: Some(0.01) });
        assert_eq!(rows[1].lambda, None);

        let roots = vec![SignChange { lo: 0.5, hi: 0.5009765625, root: 0.50048828125 }];
        let mut buf = Vec::new();
        write_roots(&mut buf, &roots).unwrap();
        assert_eq!(read_roots(buf.as_slice()).unwrap(), roots);
    }

    #[test]
    fn trajectory_round_trip_with_truncation_flag() {
        let traj = Trajectory {
            scheme: Scheme::Euler2,
            step: 0.5,
            indices: vec![0, 2],
            times: vec![0.0, 1.0],
            states: vec![[0.1, 0.2], [1.0 / 3.0, 7.0]],
            truncated_at: Some(3),
        };
        let mut buf = Vec::new();
        write_trajectory(&mut buf, &traj).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.ends_with("# truncated_at=3\n"));
        let back = read_trajectory(buf.as_slice()).unwrap();
        assert_eq!(back.truncated_at, Some(3));
        assert_eq!(back.rows[1], (2, 1.0, 1.0 / 3.0, 7.0));
    }
}
