//! Region CSV rows, point records and the SVG plot.

use std::fmt::Write as _;
use std::io;

use serde::{Deserialize, Serialize};

use secthru_core::effcap::{policy_throughputs, PhiPair, ThroughputPair};
use secthru_core::kink::{solve_state_kink, Side};
use secthru_core::kkt::{solve_state, MultiplierSet};
use secthru_core::model::{FadingGrid, QosConfig};
use secthru_core::outer::{CaseTag, SolveReport};
use secthru_core::rates::{PowerPair, PowerPolicy};

pub const STATUS_OK: &str = "ok";
pub const STATUS_KINK_MAIN: &str = "ok-kink-main";
pub const STATUS_KINK_SECOND: &str = "ok-kink-second";

/// One line of the region CSV. Failed points keep their weights and status
/// and leave every other field empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub lambda0: f64,
    pub lambda1: f64,
    #[serde(rename = "C0_bps_hz")]
    pub c0: Option<f64>,
    #[serde(rename = "C1_bps_hz")]
    pub c1: Option<f64>,
    pub case: Option<String>,
    /// Time-sharing fraction for `IIIC`, the kink price for kink points.
    pub delta: Option<f64>,
    pub kappa: Option<f64>,
    pub phi0: Option<f64>,
    pub phi1: Option<f64>,
    pub power_used: Option<f64>,
    pub iters_kappa: Option<usize>,
    pub iters_phi: Option<usize>,
    pub status: String,
}

impl Row {
    pub fn from_report(r: &SolveReport) -> Self {
        let (delta, status) = match r.kink {
            Some((Side::Main, eta)) => (Some(eta), STATUS_KINK_MAIN),
            Some((Side::Second, eta)) => (Some(eta), STATUS_KINK_SECOND),
            None => (r.delta, STATUS_OK),
        };
        Row {
            lambda0: r.lambda.0,
            lambda1: r.lambda.1,
            c0: Some(r.throughput.c0),
            c1: Some(r.throughput.c1),
            case: Some(r.case.to_string()),
            delta,
            kappa: Some(r.multipliers.kappa),
            phi0: Some(r.multipliers.phi0),
            phi1: Some(r.multipliers.phi1),
            power_used: Some(r.power_used),
            iters_kappa: Some(r.iterations.kappa),
            iters_phi: Some(r.iterations.phi),
            status: status.to_string(),
        }
    }

    pub fn failed(lambda: (f64, f64), reason: &str) -> Self {
        Row {
            lambda0: lambda.0,
            lambda1: lambda.1,
            c0: None,
            c1: None,
            case: None,
            delta: None,
            kappa: None,
            phi0: None,
            phi1: None,
            power_used: None,
            iters_kappa: None,
            iters_phi: None,
            // one line per row whatever the message
            status: format!("failed: {}", reason.replace(['\n', '\r'], " ")),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status.starts_with(STATUS_OK)
    }

    /// Writes the record as `key = value` lines, in CSV column order.
    pub fn record(&self) -> String {
        let f = |v: Option<f64>| v.map_or(String::new(), |v| v.to_string());
        let u = |v: Option<usize>| v.map_or(String::new(), |v| v.to_string());
        let fields = [
            ("lambda0", self.lambda0.to_string()),
            ("lambda1", self.lambda1.to_string()),
            ("C0_bps_hz", f(self.c0)),
            ("C1_bps_hz", f(self.c1)),
            ("case", self.case.clone().unwrap_or_default()),
            ("delta", f(self.delta)),
            ("kappa", f(self.kappa)),
            ("phi0", f(self.phi0)),
            ("phi1", f(self.phi1)),
            ("power_used", f(self.power_used)),
            ("iters_kappa", u(self.iters_kappa)),
            ("iters_phi", u(self.iters_phi)),
            ("status", self.status.clone()),
        ];
        let mut out = String::new();
        for (k, v) in fields {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}

pub fn write_csv<W: io::Write>(w: W, rows: &[Row]) -> csv::Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for r in rows {
        wtr.serialize(r)?;
    }
    // an empty sweep still carries the header
    if rows.is_empty() {
        wtr.write_record(COLUMNS)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_csv<R: io::Read>(r: R) -> csv::Result<Vec<Row>> {
    csv::Reader::from_reader(r).deserialize().collect()
}

pub const COLUMNS: [&str; 13] = [
    "lambda0",
    "lambda1",
    "C0_bps_hz",
    "C1_bps_hz",
    "case",
    "delta",
    "kappa",
    "phi0",
    "phi1",
    "power_used",
    "iters_kappa",
    "iters_phi",
    "status",
];

/// Recomputes `(C0, C1)` of a successful row from its multipliers, case and
/// `delta` by re-running the per-state solvers.
pub fn rederive(grid: &FadingGrid, qos: &QosConfig, row: &Row) -> Result<ThroughputPair, String> {
    let need = |v: Option<f64>, name: &str| v.ok_or_else(|| format!("row has no {name}"));
    let case: CaseTag = row.case.as_deref().ok_or("row has no case")?.parse().map_err(|e| format!("{e}"))?;
    let kappa = need(row.kappa, "kappa")?;
    if !kappa.is_finite() {
        // the zero-power policy of snr = 0
        return Ok(ThroughputPair { c0: 0.0, c1: 0.0 });
    }
    let phi = PhiPair { phi0: need(row.phi0, "phi0")?, phi1: need(row.phi1, "phi1")? };
    let m = MultiplierSet::new(kappa, phi, row.lambda0, row.lambda1).map_err(|e| e.to_string())?;
    let kink = match row.status.as_str() {
        STATUS_KINK_MAIN => Some(Side::Main),
        STATUS_KINK_SECOND => Some(Side::Second),
        _ => None,
    };
    let mut pairs: Vec<PowerPair> = Vec::with_capacity(grid.len());
    for s in grid.samples() {
        let p = match kink {
            Some(side) => solve_state_kink(s, m.alpha1, m.alpha2, side, need(row.delta, "delta")?, qos.beta, qos.gamma),
            None => solve_state(s, m.alpha1, m.alpha2, case.spec(row.delta), qos.beta, qos.gamma).map_err(|e| e.to_string())?.pair,
        };
        pairs.push(p);
    }
    let t = policy_throughputs(grid, &PowerPolicy { pairs }, qos).map_err(|e| e.to_string())?;
    let c0 = match case {
        CaseTag::I | CaseTag::IIIA => t.c01,
        CaseTag::II | CaseTag::IIIB => t.c02,
        CaseTag::IIIC => {
            let d = row.delta.unwrap_or(0.0);
            d * t.c01 + (1.0 - d) * t.c02
        }
    };
    Ok(ThroughputPair { c0, c1: t.c1 })
}

/// Polyline of the frontier with labelled axes.
pub fn svg(rows: &[Row], title: &str) -> String {
    let pts: Vec<(f64, f64)> = rows.iter().filter_map(|r| Some((r.c0?, r.c1?))).collect();
    let (w, h, m) = (480.0, 480.0, 60.0);
    let x_max = pts.iter().map(|p| p.0).fold(0.0, f64::max).max(1e-12);
    let y_max = pts.iter().map(|p| p.1).fold(0.0, f64::max).max(1e-12);
    let sx = |v: f64| m + v / x_max * (w - 2.0 * m);
    let sy = |v: f64| h - m - v / y_max * (h - 2.0 * m);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#, w / 2.0, escape(title));
    let _ = writeln!(s, r#"<line x1="{m}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#, h - m, w - m, h - m);
    let _ = writeln!(s, r#"<line x1="{m}" y1="{}" x2="{m}" y2="{m}" stroke="black"/>"#, h - m);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle" font-size="13">C0 (bits/s/Hz)</text>"#, w / 2.0, h - 15.0);
    let _ = writeln!(
        s,
        r#"<text x="18" y="{}" text-anchor="middle" font-size="13" transform="rotate(-90 18 {})">C1 (bits/s/Hz)</text>"#,
        h / 2.0,
        h / 2.0
    );
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle" font-size="11">{x_max:.4}</text>"#, w - m, h - m + 16.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end" font-size="11">{y_max:.4}</text>"#, m - 4.0, m + 4.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end" font-size="11">0</text>"#, m - 4.0, h - m + 16.0);
    let coords: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.3},{:.3}", sx(x), sy(y))).collect();
    let _ = writeln!(s, r#"<polyline fill="none" stroke="steelblue" stroke-width="2" points="{}"/>"#, coords.join(" "));
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Row {
        Row {
            lambda0: 0.25,
            lambda1: 0.75,
            c0: Some(0.1),
            c1: Some(1.0 / 3.0),
            case: Some("I".into()),
            delta: None,
            kappa: Some(f64::INFINITY),
            phi0: Some(1.0),
            phi1: Some(2.0),
            power_used: Some(1.0),
            iters_kappa: Some(7),
            iters_phi: Some(3),
            status: STATUS_OK.into(),
        }
    }

    #[test]
    fn csv_round_trips_exactly_with_the_fixed_header() {
        let rows = vec![sample(), Row::failed((1.0, 0.0), "no\nconvergence")];
        let mut buf = Vec::new();
        write_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().next().unwrap(), COLUMNS.join(","));
        assert_eq!(text.lines().count(), 3);
        assert_eq!(read_csv(&buf[..]).unwrap(), rows);
    }

    #[test]
    fn empty_sweep_keeps_the_header() {
        let mut buf = Vec::new();
        write_csv(&mut buf, &[]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().trim_end(), COLUMNS.join(","));
    }

    #[test]
    fn svg_has_a_point_per_successful_row() {
        let rows = vec![sample(), Row::failed((1.0, 0.0), "x"), Row { c0: Some(0.3), c1: Some(0.0), ..sample() }];
        let s = svg(&rows, "a < b");
        let poly = s.lines().find(|l| l.starts_with("<polyline")).unwrap();
        assert_eq!(poly.matches(',').count(), 2);
        assert!(s.contains("a &lt; b") && s.contains("C0 (bits/s/Hz)") && s.contains("C1 (bits/s/Hz)"));
    }
}
