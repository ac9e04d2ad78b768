//! CSV series. Floats use Rust's shortest round-trip formatting, so equal
//! values always produce equal bytes.

use std::io::Write;

use crate::dynamics::{GreenRow, OrbitSample};
use crate::weak_kam::{ConjugatePairData, GridFunction};

pub type CsvResult = Result<(), csv::Error>;

fn axis_names(prefix: &str, n: usize) -> Vec<String> {
    if n == 1 {
        vec![prefix.to_string()]
    } else {
        (1..=n).map(|a| format!("{prefix}{a}")).collect()
    }
}

fn entry_names(prefix: &str, n: usize) -> Vec<String> {
    (0..n).flat_map(|i| (0..n).map(move |j| format!("{prefix}_{i}{j}"))).collect()
}

fn num(v: f64) -> String {
    format!("{v}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// `t, g_t_ij…, g_minus_t_ij…, residual_plus, residual_minus`; residuals are
/// empty on the first rung.
pub fn write_ladder<W: Write>(w: W, rows: &[GreenRow]) -> CsvResult {
    let mut out = csv::Writer::from_writer(w);
    let n = rows.first().map(|r| r.g_t.dim()).unwrap_or(1);
    let mut header = vec!["t".to_string()];
    header.extend(entry_names("g_t", n));
    header.extend(entry_names("g_minus_t", n));
    header.extend(["residual_plus".to_string(), "residual_minus".to_string()]);
    out.write_record(&header)?;
    for r in rows {
        let mut rec = vec![num(r.t)];
        rec.extend(r.g_t.to_row_major().into_iter().map(num));
        rec.extend(r.g_minus_t.to_row_major().into_iter().map(num));
        rec.extend([opt(r.residual_plus), opt(r.residual_minus)]);
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}

/// `t, x, p, H`.
pub fn write_orbit<W: Write>(w: W, samples: &[OrbitSample]) -> CsvResult {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["t", "x", "p", "H"])?;
    for s in samples {
        out.write_record([num(s.t), num(s.x), num(s.p), num(s.h)])?;
    }
    out.flush()?;
    Ok(())
}

/// Node coordinates followed by one column per named function.
pub fn write_grid<W: Write>(w: W, columns: &[(&str, &GridFunction)]) -> CsvResult {
    let mut out = csv::Writer::from_writer(w);
    let Some((_, first)) = columns.first() else {
        return Ok(());
    };
    let mut header = axis_names("x", first.dim());
    header.extend(columns.iter().map(|(name, _)| name.to_string()));
    out.write_record(&header)?;
    for k in 0..first.len() {
        let mut rec: Vec<String> = first.node(k).iter().map(|&v| num(v)).collect();
        rec.extend(columns.iter().map(|(_, g)| num(g.values()[k])));
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}

/// `x…, u, w, gap, in_i_set, p…`; momenta are filled on lifted nodes of
/// `I(u, w)` and empty elsewhere.
pub fn write_solution<W: Write>(w: W, pair: &ConjugatePairData) -> CsvResult {
    let mut out = csv::Writer::from_writer(w);
    let n = pair.u.dim();
    let mut header = axis_names("x", n);
    header.extend(["u", "w", "gap", "in_i_set"].map(String::from));
    header.extend(axis_names("p", n));
    out.write_record(&header)?;
    let mut lifted = pair.i_nodes.iter().filter(|k| !pair.non_smooth.contains(k)).zip(&pair.i_set.samples).peekable();
    for k in 0..pair.u.len() {
        let mut rec: Vec<String> = pair.u.node(k).iter().map(|&v| num(v)).collect();
        rec.extend([num(pair.u.values()[k]), num(pair.w.values()[k]), num(pair.gap.values()[k])]);
        rec.push(if pair.i_nodes.binary_search(&k).is_ok() { "1" } else { "0" }.to_string());
        match lifted.peek() {
            Some((&node, (_, p))) if node == k => {
                rec.extend(p.iter().map(|&v| num(v)));
                lifted.next();
            }
            _ => rec.extend(std::iter::repeat_n(String::new(), n)),
        }
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}
