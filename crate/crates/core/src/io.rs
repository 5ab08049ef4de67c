//! CSV and JSON files exchanged with the outside world. Every writer has a
//! reader that gives back the same values.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64 as C64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::dynamics::RabiTrace;
use crate::error::{Error, Result};
use crate::incoherent::ComparisonRow;
use crate::pulse::PulseShape;
use crate::rb::{DecayCurve, DecayPoint};

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().has_headers(true).from_writer(w)
}

fn write_rows<W: Write, T: Serialize>(w: W, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut wr = writer(w);
    for r in rows {
        wr.serialize(r)?;
    }
    wr.flush()?;
    Ok(())
}

fn read_rows<R: Read, T: DeserializeOwned>(r: R, expected: &[&str]) -> Result<Vec<T>> {
    let mut rd = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(r);
    let headers = rd.headers()?.clone();
    let got: Vec<&str> = headers.iter().collect();
    if got != expected {
        return Err(Error::Parse(format!("expected columns {expected:?}, found {got:?}")));
    }
    rd.deserialize().enumerate().map(|(i, r)| r.map_err(|e| Error::Parse(format!("row {}: {e}", i + 1)))).collect()
}

pub const DECAY_COLUMNS: [&str; 5] = ["l", "seq_time_us", "mean_sz", "stderr", "n_seqs"];

pub fn write_decay<W: Write>(w: W, curve: &DecayCurve) -> Result<()> {
    write_rows(w, &curve.points)
}

pub fn read_decay<R: Read>(r: R) -> Result<DecayCurve> {
    let points: Vec<DecayPoint> = read_rows(r, &DECAY_COLUMNS)?;
    if points.is_empty() {
        return Err(Error::Parse("decay file has no rows".into()));
    }
    if points.windows(2).any(|w| w[1].l <= w[0].l) {
        return Err(Error::Parse("decay rows must have strictly increasing l".into()));
    }
    if points.iter().any(|p| !p.mean_sz.is_finite() || !(p.stderr >= 0.0) || !p.seq_time_us.is_finite()) {
        return Err(Error::Parse("decay rows need finite values and non-negative stderr".into()));
    }
    Ok(DecayCurve { points })
}

#[derive(Serialize, Deserialize)]
struct WaveformRow {
    t_us: f64,
    amp_x_rad_per_us: f64,
    amp_y_rad_per_us: f64,
}

pub const WAVEFORM_COLUMNS: [&str; 3] = ["t_us", "amp_x_rad_per_us", "amp_y_rad_per_us"];

/// One row per sample, `t_us` at the sample start, amplitudes in the
/// rotating frame with the pulse phase applied.
pub fn write_waveform<W: Write>(w: W, pulse: &PulseShape) -> Result<()> {
    write_rows(
        w,
        (0..pulse.len()).map(|k| {
            let (x, y) = pulse.drive_xy(k);
            WaveformRow { t_us: k as f64 * pulse.dt(), amp_x_rad_per_us: x, amp_y_rad_per_us: y }
        }),
    )
}

/// Reads a waveform; the step is taken from the first two rows and must be
/// uniform. The result has phase zero.
pub fn read_waveform<R: Read>(r: R) -> Result<PulseShape> {
    let rows: Vec<WaveformRow> = read_rows(r, &WAVEFORM_COLUMNS)?;
    if rows.len() < 2 {
        return Err(Error::Parse("waveform needs at least two rows".into()));
    }
    let dt = rows[1].t_us - rows[0].t_us;
    for (k, row) in rows.iter().enumerate() {
        let t = rows[0].t_us + k as f64 * dt;
        if !((row.t_us - t).abs() <= 1e-9 * dt.abs().max(1.0)) {
            return Err(Error::Parse(format!("waveform row {} is off the uniform grid", k + 1)));
        }
    }
    PulseShape::new(rows.iter().map(|r| C64::new(r.amp_x_rad_per_us, r.amp_y_rad_per_us)).collect(), dt, 0.0)
}

#[derive(Serialize, Deserialize)]
struct SpectrumRow {
    freq_mhz: f64,
    weight: f64,
}

pub const SPECTRUM_COLUMNS: [&str; 2] = ["freq_mhz", "weight"];

/// `(MHz, weight)` rows.
pub fn write_spectrum<W: Write>(w: W, rows: &[(f64, f64)]) -> Result<()> {
    write_rows(w, rows.iter().map(|&(freq_mhz, weight)| SpectrumRow { freq_mhz, weight }))
}

pub fn read_spectrum<R: Read>(r: R) -> Result<Vec<(f64, f64)>> {
    let rows: Vec<SpectrumRow> = read_rows(r, &SPECTRUM_COLUMNS)?;
    Ok(rows.into_iter().map(|r| (r.freq_mhz, r.weight)).collect())
}

#[derive(Serialize, Deserialize)]
struct NutationRow {
    nutation_mhz: f64,
    weight: f64,
}

pub const NUTATION_COLUMNS: [&str; 2] = ["nutation_mhz", "weight"];

pub fn write_nutation<W: Write>(w: W, rows: &[(f64, f64)]) -> Result<()> {
    write_rows(w, rows.iter().map(|&(nutation_mhz, weight)| NutationRow { nutation_mhz, weight }))
}

pub fn read_nutation<R: Read>(r: R) -> Result<Vec<(f64, f64)>> {
    let rows: Vec<NutationRow> = read_rows(r, &NUTATION_COLUMNS)?;
    Ok(rows.into_iter().map(|r| (r.nutation_mhz, r.weight)).collect())
}

#[derive(Serialize, Deserialize)]
struct RabiRow {
    t_us: f64,
    mx: f64,
    my: f64,
    mz: f64,
}

pub const RABI_COLUMNS: [&str; 4] = ["t_us", "mx", "my", "mz"];

pub fn write_rabi<W: Write>(w: W, trace: &RabiTrace) -> Result<()> {
    write_rows(
        w,
        (0..trace.len()).map(|k| RabiRow { t_us: k as f64 * trace.dt, mx: trace.mx[k], my: trace.my[k], mz: trace.mz[k] }),
    )
}

/// The step is taken from the second row; times must start at zero.
pub fn read_rabi<R: Read>(r: R) -> Result<RabiTrace> {
    let rows: Vec<RabiRow> = read_rows(r, &RABI_COLUMNS)?;
    if rows.len() < 2 || rows[0].t_us != 0.0 {
        return Err(Error::Parse("Rabi trace needs at least two rows starting at t = 0".into()));
    }
    let dt = rows[1].t_us;
    if rows.iter().enumerate().any(|(k, row)| (row.t_us - k as f64 * dt).abs() > 1e-9 * dt.max(1.0)) {
        return Err(Error::Parse("Rabi trace is off the uniform grid".into()));
    }
    Ok(RabiTrace {
        dt,
        mx: rows.iter().map(|r| r.mx).collect(),
        my: rows.iter().map(|r| r.my).collect(),
        mz: rows.iter().map(|r| r.mz).collect(),
    })
}

pub const COMPARISON_COLUMNS: [&str; 4] = ["n", "analytic", "mc_mean", "mc_stderr"];

pub fn write_comparison<W: Write>(w: W, rows: &[ComparisonRow]) -> Result<()> {
    write_rows(w, rows)
}

pub fn read_comparison<R: Read>(r: R) -> Result<Vec<ComparisonRow>> {
    read_rows(r, &COMPARISON_COLUMNS)
}

/// Pretty JSON with a trailing newline.
pub fn write_json<W: Write, T: Serialize>(mut w: W, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    Ok(())
}

pub fn read_json<R: Read, T: DeserializeOwned>(r: R) -> Result<T> {
    Ok(serde_json::from_reader(r)?)
}

pub fn create(path: &Path) -> Result<File> {
    File::create(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

pub fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pulse::make_gaussian;

    #[test]
    fn decay_round_trip() {
        let curve = DecayCurve {
            points: vec![
                DecayPoint { l: 1, seq_time_us: 0.07, mean_sz: 0.991234567891, stderr: 1e-4, n_seqs: 98 },
                DecayPoint { l: 7, seq_time_us: 0.49, mean_sz: -0.0012, stderr: 0.0, n_seqs: 98 },
            ],
        };
        let mut buf = Vec::new();
        write_decay(&mut buf, &curve).unwrap();
        assert!(buf.starts_with(b"l,seq_time_us,mean_sz,stderr,n_seqs\n"));
        assert_eq!(read_decay(&buf[..]).unwrap(), curve);
    }

    #[test]
    fn malformed_decay() {
        for text in [
            "l,mean_sz\n1,0.5\n",
            "l,seq_time_us,mean_sz,stderr,n_seqs\n",
            "l,seq_time_us,mean_sz,stderr,n_seqs\n1,0,abc,0,1\n",
            "l,seq_time_us,mean_sz,stderr,n_seqs\n2,0,0.5,0,1\n1,0,0.6,0,1\n",
            "l,seq_time_us,mean_sz,stderr,n_seqs\n1,0,0.5,-1,1\n",
        ] {
            assert!(read_decay(text.as_bytes()).is_err(), "{text}");
        }
    }

    #[test]
    fn waveform_round_trip() {
        let g = make_gaussian(0.035, 1.0, 0.0, 0.001).unwrap();
        let g = g.with_samples(g.samples().iter().enumerate().map(|(k, z)| z * C64::from_polar(1.0, 0.1 * k as f64)).collect()).unwrap();
        let mut buf = Vec::new();
        write_waveform(&mut buf, &g).unwrap();
        let back = read_waveform(&buf[..]).unwrap();
        assert_eq!(back.len(), g.len());
        assert!((back.dt() - g.dt()).abs() < 1e-15);
        for (a, b) in back.samples().iter().zip(g.samples()) {
            assert_eq!(a, b);
        }
        let shifted = g.with_phase(0.5);
        let mut buf = Vec::new();
        write_waveform(&mut buf, &shifted).unwrap();
        let back = read_waveform(&buf[..]).unwrap();
        assert!((back.samples()[10] - shifted.lab_samples()[10]).norm() < 1e-15);
    }

    #[test]
    fn spectrum_and_comparison_round_trip() {
        let rows = vec![(-1.5, 0.25), (0.0, 0.5), (1.5, 0.25)];
        let mut buf = Vec::new();
        write_spectrum(&mut buf, &rows).unwrap();
        assert_eq!(read_spectrum(&buf[..]).unwrap(), rows);
        let mut buf = Vec::new();
        write_nutation(&mut buf, &rows).unwrap();
        assert_eq!(read_nutation(&buf[..]).unwrap(), rows);
        assert!(read_spectrum(&buf[..]).is_err());
        let cmp = vec![ComparisonRow { n: 3, analytic: 0.9, mc_mean: 0.89, mc_stderr: 0.01 }];
        let mut buf = Vec::new();
        write_comparison(&mut buf, &cmp).unwrap();
        assert_eq!(read_comparison(&buf[..]).unwrap(), cmp);
    }

    #[test]
    fn rabi_round_trip() {
        let trace = RabiTrace { dt: 0.001, mx: vec![0.0, 0.1, 0.2], my: vec![0.0; 3], mz: vec![1.0, 0.99, -0.5] };
        let mut buf = Vec::new();
        write_rabi(&mut buf, &trace).unwrap();
        let back = read_rabi(&buf[..]).unwrap();
        assert_eq!(back.mz, trace.mz);
        assert!((back.dt - 0.001).abs() < 1e-18);
    }
}
