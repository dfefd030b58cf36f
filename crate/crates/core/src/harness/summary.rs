use std::io::Write;

use crate::error::Result;

use super::config::Method;
use super::experiment::RunResult;

/// Five-number summary of a gain sample.
#[derive(Debug, Clone, PartialEq)]
pub struct GainSummary {
    pub method: String,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

/// Linear-interpolation quantile of a sorted sample (`h = (n − 1) p`).
fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// `(min, q1, median, q3, max)`; all NaN for an empty sample.
pub fn quartiles(values: &[f64]) -> (f64, f64, f64, f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN, f64::NAN, f64::NAN, f64::NAN);
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    (
        v[0],
        quantile_sorted(&v, 0.25),
        quantile_sorted(&v, 0.5),
        quantile_sorted(&v, 0.75),
        v[v.len() - 1],
    )
}

pub fn summarize(method: &str, gains: &[usize]) -> GainSummary {
    let vals: Vec<f64> = gains.iter().map(|&g| g as f64).collect();
    summarize_values(method, &vals)
}

fn summarize_values(method: &str, vals: &[f64]) -> GainSummary {
    let (min, q1, median, q3, max) = quartiles(vals);
    GainSummary {
        method: method.to_string(),
        min,
        q1,
        median,
        q3,
        max,
    }
}

/// Per-run `gain(method) − gain(Rand)` summaries for every non-random method,
/// paired within each repetition.
pub fn paired_differences(rows: &[RunResult]) -> Vec<GainSummary> {
    let rand_gain = |run_id: u64| {
        rows.iter()
            .find(|r| r.run_id == run_id && r.method == Method::Rand)
            .map(|r| r.gain as f64)
    };
    let mut methods: Vec<Method> = rows
        .iter()
        .map(|r| r.method)
        .filter(|&m| m != Method::Rand)
        .collect();
    methods.sort();
    methods.dedup();
    methods
        .into_iter()
        .map(|m| {
            let diffs: Vec<f64> = rows
                .iter()
                .filter(|r| r.method == m)
                .filter_map(|r| rand_gain(r.run_id).map(|g| r.gain as f64 - g))
                .collect();
            summarize_values(m.name(), &diffs)
        })
        .collect()
}

/// `method,min,q1,median,q3,max` rows.
pub fn write_summary_csv<W: Write>(summary: &[GainSummary], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["method", "min", "q1", "median", "q3", "max"])?;
    for s in summary {
        w.write_record([
            s.method.clone(),
            s.min.to_string(),
            s.q1.to_string(),
            s.median.to_string(),
            s.q3.to_string(),
            s.max.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quartiles_interpolate() {
        let (min, q1, med, q3, max) = quartiles(&[4.0, 1.0, 3.0, 2.0]);
        assert_eq!((min, q1, med, q3, max), (1.0, 1.75, 2.5, 3.25, 4.0));
        let (_, q1, med, q3, _) = quartiles(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!((q1, med, q3), (2.0, 3.0, 4.0));
    }

    #[test]
    fn single_value() {
        assert_eq!(quartiles(&[7.0]), (7.0, 7.0, 7.0, 7.0, 7.0));
    }

    #[test]
    fn differences_are_paired_by_run() {
        let row = |run_id, method, gain| RunResult {
            run_id,
            method,
            gain,
            wall_time_rule: None,
            trajectory: None,
        };
        let rows = vec![
            row(0, Method::Rand, 10),
            row(0, Method::TL, 30),
            row(1, Method::Rand, 50),
            row(1, Method::TL, 55),
        ];
        let d = paired_differences(&rows);
        assert_eq!(d.len(), 1);
        assert_eq!((d[0].min, d[0].max), (5.0, 20.0));
    }

    #[test]
    fn summary_csv_header() {
        let mut buf = Vec::new();
        write_summary_csv(&[summarize("FPD", &[1, 2, 3])], &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "method,min,q1,median,q3,max\nFPD,1,1.5,2,2.5,3\n"
        );
    }
}
