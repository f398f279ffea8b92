use std::io::{BufRead, Write};

use super::{DwellRecord, Level, TelegraphTrace};
use crate::error::{Error, Result};
use crate::rates::Pocket;

/// Writes `key=value` header lines followed by one sample per line.
pub fn write_trace<W: Write>(trace: &TelegraphTrace, mut out: W) -> Result<()> {
    writeln!(out, "sample_rate_hz={}", trace.sample_rate_hz)?;
    if let Some(seed) = trace.seed {
        writeln!(out, "seed={seed}")?;
    }
    if !trace.levels_pa.is_empty() {
        let levels: Vec<String> = trace.levels_pa.iter().map(|v| v.to_string()).collect();
        writeln!(out, "levels_pA={}", levels.join(","))?;
    }
    if let Some(noise) = trace.noise_rms_pa {
        writeln!(out, "noise_rms_pA={noise}")?;
    }
    for v in &trace.samples {
        writeln!(out, "{v}")?;
    }
    Ok(())
}

fn parse_f64(s: &str, line: usize) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::invalid(format!("line {line}: cannot parse '{}' as a number", s.trim())))
}

/// Reads the format of [`write_trace`], or two-column `time,current` data.
pub fn read_trace<R: BufRead>(input: R) -> Result<TelegraphTrace> {
    let mut rate = None;
    let mut seed = None;
    let mut levels = Vec::new();
    let mut noise = None;
    let mut samples = Vec::new();
    let mut times = Vec::new();
    for (idx, line) in input.lines().enumerate() {
        let line = line?;
        let no = idx + 1;
        let l = line.trim();
        if l.is_empty() || l.starts_with('#') {
            continue;
        }
        if let Some((key, value)) = l.split_once('=') {
            let value = value.trim();
            match key.trim() {
                "sample_rate_hz" => rate = Some(parse_f64(value, no)?),
                "seed" => {
                    seed = Some(value.parse::<u64>().map_err(|_| Error::invalid(format!("line {no}: bad seed")))?)
                }
                "levels_pA" => {
                    levels = value.split(',').map(|v| parse_f64(v, no)).collect::<Result<_>>()?;
                }
                "noise_rms_pA" => noise = Some(parse_f64(value, no)?),
                other => log::warn!("ignoring unknown trace header '{other}'"),
            }
            continue;
        }
        let fields: Vec<&str> = l.split(|c: char| c == ',' || c.is_whitespace()).filter(|f| !f.is_empty()).collect();
        match fields.len() {
            1 => samples.push(parse_f64(fields[0], no)?),
            2 => {
                if samples.is_empty() && fields[0].parse::<f64>().is_err() {
                    continue;
                }
                times.push(parse_f64(fields[0], no)?);
                samples.push(parse_f64(fields[1], no)?);
            }
            _ => return Err(Error::invalid(format!("line {no}: expected one or two columns"))),
        }
    }
    if !times.is_empty() && times.len() != samples.len() {
        return Err(Error::invalid("mixed one- and two-column sample lines"));
    }
    let rate = match rate {
        Some(r) => r,
        None if times.len() >= 2 => {
            let span = times[times.len() - 1] - times[0];
            if !(span > 0.0) {
                return Err(Error::invalid("time column must increase"));
            }
            (times.len() - 1) as f64 / span
        }
        None => return Err(Error::invalid("trace has no sample_rate_hz header and no time column")),
    };
    let mut trace = TelegraphTrace::new(samples, rate)?;
    trace.seed = seed;
    trace.levels_pa = levels;
    trace.noise_rms_pa = noise;
    Ok(trace)
}

/// CSV with columns `state,duration_s,censored`; the state is the pocket when
/// known, otherwise `H` or `L`.
pub fn write_dwells<W: Write>(dwells: &[DwellRecord], mut out: W) -> Result<()> {
    writeln!(out, "state,duration_s,censored")?;
    for d in dwells {
        let state = match (d.pocket, d.level) {
            (Some(Pocket::A), _) => "A",
            (Some(Pocket::B), _) => "B",
            (_, Level::High) => "H",
            (_, Level::Low) => "L",
        };
        writeln!(out, "{state},{:.9e},{}", d.duration, d.censored)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trace_round_trip() {
        let mut t = TelegraphTrace::new(vec![1.25, -3.0, 1e-7], 1e4).unwrap();
        t.seed = Some(42);
        t.levels_pa = vec![1.0, 2.0];
        t.noise_rms_pa = Some(0.2);
        let mut buf = Vec::new();
        write_trace(&t, &mut buf).unwrap();
        let back = read_trace(buf.as_slice()).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn two_column_input() {
        let text = "time,current\n0.0,1\n0.001,2\n0.002,3\n";
        let t = read_trace(text.as_bytes()).unwrap();
        assert_eq!(t.samples, vec![1.0, 2.0, 3.0]);
        assert!((t.sample_rate_hz - 1000.0).abs() < 1e-9);
    }

    #[test]
    fn missing_rate_is_an_error() {
        assert!(read_trace("1\n2\n".as_bytes()).is_err());
        assert!(read_trace("sample_rate_hz=10\n1\nx\n".as_bytes()).is_err());
    }

    #[test]
    fn dwell_csv() {
        let d = [DwellRecord { level: Level::High, pocket: Some(Pocket::B), duration: 0.5, censored: true }];
        let mut buf = Vec::new();
        write_dwells(&d, &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s, "state,duration_s,censored\nB,5.000000000e-1,true\n");
    }
}
