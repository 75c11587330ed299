use std::io::{self, Write};

use super::{Cone, ConicProgram};

/// Writes the program in a coordinate (matrix-market-like) text layout so it
/// can be loaded into an external solver for cross-checking. Indices are
/// 1-based; only nonzeros are listed.
pub fn write_dump<W: Write>(p: &ConicProgram, mut out: W) -> io::Result<()> {
    writeln!(out, "%%ConicProgram coordinate real")?;
    writeln!(out, "% variables equalities")?;
    writeln!(out, "{} {}", p.num_vars(), p.num_eqs())?;
    for cone in &p.cones {
        match cone {
            Cone::Free(k) => writeln!(out, "cone free {k}")?,
            Cone::NonNeg(k) => writeln!(out, "cone nonneg {k}")?,
            Cone::SecondOrder(k) => writeln!(out, "cone soc {k}")?,
        }
    }
    for s in &p.var_map {
        writeln!(out, "var {} {} {}", s.name, s.start + 1, s.len)?;
    }
    for (j, &c) in p.objective.iter().enumerate() {
        if c != 0.0 {
            writeln!(out, "c {} {:e}", j + 1, c)?;
        }
    }
    for i in 0..p.num_eqs() {
        for j in 0..p.num_vars() {
            let v = p.eq_matrix[(i, j)];
            if v != 0.0 {
                writeln!(out, "A {} {} {:e}", i + 1, j + 1, v)?;
            }
        }
    }
    for (i, &b) in p.eq_rhs.iter().enumerate() {
        if b != 0.0 {
            writeln!(out, "b {} {:e}", i + 1, b)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::socp::ProgramBuilder;

    #[test]
    fn dump_lists_nonzeros() {
        let mut b = ProgramBuilder::new();
        let x = b.add_block("x", Cone::NonNeg(2));
        b.add_cost(x, 1.0);
        b.add_eq(vec![(x, 1.0), (x + 1, -1.0)], 3.0);
        let mut buf = Vec::new();
        write_dump(&b.build(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("cone nonneg 2"));
        assert!(text.contains("A 1 2 -1e0"));
        assert!(text.contains("b 1 3e0"));
    }
}
