//! Text output: CSV fields, OBJ meshes and JSON numbers, all with
//! 17 significant digits.

use std::io::{self, Write};

use serde_json::{Number, Value};

use crate::grid::ScalarField;

/// Round-trip-safe decimal form of `x` (17 significant digits).
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// JSON number carrying exactly the digits of [`fmt_f64`]; non-finite values
/// become `null`.
pub fn json_f64(x: f64) -> Value {
    if !x.is_finite() {
        return Value::Null;
    }
    serde_json::from_str::<Number>(&fmt_f64(x)).map(Value::Number).unwrap_or(Value::Null)
}

/// `s,theta,u` rows, one per node.
pub fn write_field_csv(field: &ScalarField, mut w: impl Write) -> io::Result<()> {
    let g = field.grid();
    writeln!(w, "s,theta,u")?;
    for i in 0..g.ns() {
        for j in 0..g.ntheta() {
            writeln!(w, "{},{},{}", fmt_f64(g.s(i)), fmt_f64(g.theta(j)), fmt_f64(field.get(i, j)))?;
        }
    }
    Ok(())
}

/// Quad mesh through the nodes of `field`'s grid, `embed(s, θ)` giving the
/// vertex position. The θ seam is always closed; the `s` seam only on
/// periodic grids.
pub fn write_obj(field: &ScalarField, embed: impl Fn(f64, f64) -> [f64; 3], mut w: impl Write) -> io::Result<()> {
    let g = field.grid();
    let (ns, nt) = (g.ns(), g.ntheta());
    for i in 0..ns {
        for j in 0..nt {
            let [x, y, z] = embed(g.s(i), g.theta(j));
            writeln!(w, "v {} {} {}", fmt_f64(x), fmt_f64(y), fmt_f64(z))?;
        }
    }
    if nt < 3 {
        return Ok(());
    }
    let rows = if g.is_periodic() { ns } else { ns - 1 };
    for i in 0..rows {
        let i1 = (i + 1) % ns;
        for j in 0..nt {
            let j1 = (j + 1) % nt;
            let v = |a: usize, b: usize| g.index(a, b) + 1;
            writeln!(w, "f {} {} {} {}", v(i, j), v(i1, j), v(i1, j1), v(i, j1))?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid2D;

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
            let mantissa = s.split('e').next().unwrap().trim_start_matches('-');
            assert_eq!(mantissa.chars().filter(|c| c.is_ascii_digit()).count(), 17);
        }
        assert_eq!(json_f64(f64::NAN), Value::Null);
        assert_eq!(json_f64(0.5).to_string(), "5.0000000000000000e-1");
    }

    #[test]
    fn obj_counts() {
        let g = Grid2D::periodic(8, 8, 2.0).unwrap();
        let f = ScalarField::zeros(g);
        let mut out = Vec::new();
        write_obj(&f, |s, t| [s, t.cos(), t.sin()], &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().filter(|l| l.starts_with("v ")).count(), 64);
        assert_eq!(text.lines().filter(|l| l.starts_with("f ")).count(), 64);
        let g = Grid2D::neumann(8, 8, 1.0).unwrap();
        let mut out = Vec::new();
        write_obj(&ScalarField::zeros(g), |s, t| [s, t.cos(), t.sin()], &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap().lines().filter(|l| l.starts_with("f ")).count(), 56);
    }

    #[test]
    fn field_csv_layout() {
        let g = Grid2D::neumann(8, 8, 1.0).unwrap();
        let f = ScalarField::from_fn(g, |s, _| s);
        let mut out = Vec::new();
        write_field_csv(&f, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().count(), 65);
        assert!(text.starts_with("s,theta,u\n"));
    }
}
