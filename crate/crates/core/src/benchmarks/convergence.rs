use std::io::Write;

use crate::dynamics::fmt_f64;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub steps: usize,
    pub n: usize,
    pub error: f64,
    /// `log2(e_prev / e_this)`; `None` on the first row.
    pub rate: Option<f64>,
}

/// Runs `levels` refinements, doubling both the step count and the grid
/// size each time. `run(steps, n)` returns the error at that level.
pub fn convergence_study<F>(base_steps: usize, base_n: usize, levels: usize, mut run: F) -> Result<Vec<ConvergenceRow>>
where
    F: FnMut(usize, usize) -> Result<f64>,
{
    if levels < 2 {
        return Err(Error::Parameter(format!(
            "a convergence study needs at least 2 levels, got {levels}"
        )));
    }
    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(levels);
    for level in 0..levels {
        let (steps, n) = (base_steps << level, base_n << level);
        let error = run(steps, n)?;
        let rate = rows.last().map(|prev| (prev.error / error).log2());
        rows.push(ConvergenceRow { steps, n, error, rate });
    }
    Ok(rows)
}

/// CSV `steps,n,error,rate`; the first rate is empty.
pub fn write_convergence_csv<W: Write>(rows: &[ConvergenceRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "steps,n,error,rate")?;
    for r in rows {
        let rate = r.rate.map(fmt_f64).unwrap_or_default();
        writeln!(out, "{},{},{},{rate}", r.steps, r.n, fmt_f64(r.error))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_first_order() {
        let mut level = 0;
        let rows = convergence_study(50, 128, 4, |_, _| {
            level += 1;
            Ok(3.0 * 0.5f64.powi(level))
        })
        .unwrap();
        assert_eq!(rows.len(), 4);
        assert_eq!((rows[3].steps, rows[3].n), (400, 1024));
        assert!(rows[0].rate.is_none());
        for r in &rows[1..] {
            assert!((r.rate.unwrap() - 1.0).abs() < 1e-12);
        }
        let mut csv = Vec::new();
        write_convergence_csv(&rows, &mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("steps,n,error,rate\n50,128,1.5000000000000000e0,\n"));
        assert!(convergence_study(1, 8, 1, |_, _| Ok(1.0)).is_err());
    }
}
