//! Plain-text problem dump.
//!
//! ```text
//! momentgmp-conic 1
//! dims <n> <m> <nnz>
//! cones <count>
//! zero <k> | nonneg <k> | psd <side>      (one line per cone, in row order)
//! c <j> <value>                            (nonzeros of c, 0-based)
//! b <i> <value>                            (nonzeros of b)
//! A <i> <j> <value>                        (nonzeros of A)
//! ```
//!
//! Values are written with `{:e}` so they round-trip exactly. PSD rows use
//! the column-major lower-triangle svec layout with √2 off-diagonal scaling.

use std::io::{BufRead, Write};

use super::{Cone, ConicProblem, CsrMatrix};
use crate::error::{domain, Result};

const MAGIC: &str = "momentgmp-conic 1";

pub fn write_dump<W: Write>(p: &ConicProblem, mut out: W) -> Result<()> {
    p.validate()?;
    writeln!(out, "{MAGIC}")?;
    writeln!(out, "dims {} {} {}", p.num_vars(), p.num_rows(), p.a.nnz())?;
    writeln!(out, "cones {}", p.cones.len())?;
    for cone in &p.cones {
        match cone {
            Cone::Zero(k) => writeln!(out, "zero {k}")?,
            Cone::NonNeg(k) => writeln!(out, "nonneg {k}")?,
            Cone::Psd(s) => writeln!(out, "psd {s}")?,
        }
    }
    for (j, v) in p.c.iter().enumerate().filter(|(_, v)| **v != 0.0) {
        writeln!(out, "c {j} {v:e}")?;
    }
    for (i, v) in p.b.iter().enumerate().filter(|(_, v)| **v != 0.0) {
        writeln!(out, "b {i} {v:e}")?;
    }
    for (i, j, v) in p.a.triplets() {
        writeln!(out, "A {i} {j} {v:e}")?;
    }
    Ok(())
}

fn parse<T: std::str::FromStr>(tok: Option<&str>, line: usize) -> Result<T> {
    tok.and_then(|t| t.parse().ok())
        .map_or_else(|| domain(format!("dump line {line}: malformed field")), Ok)
}

pub fn read_dump<R: BufRead>(input: R) -> Result<ConicProblem> {
    let mut lines = input.lines().enumerate();
    let mut next = || -> Result<(usize, String)> {
        match lines.next() {
            Some((k, l)) => Ok((k + 1, l?)),
            None => domain("dump truncated"),
        }
    };
    let (_, magic) = next()?;
    if magic.trim() != MAGIC {
        return domain("not a conic dump");
    }
    let (ln, dims) = next()?;
    let mut t = dims.split_whitespace();
    if t.next() != Some("dims") {
        return domain(format!("dump line {ln}: expected dims"));
    }
    let n: usize = parse(t.next(), ln)?;
    let m: usize = parse(t.next(), ln)?;
    let _nnz: usize = parse(t.next(), ln)?;
    let (ln, cl) = next()?;
    let mut t = cl.split_whitespace();
    if t.next() != Some("cones") {
        return domain(format!("dump line {ln}: expected cones"));
    }
    let count: usize = parse(t.next(), ln)?;
    let mut cones = Vec::with_capacity(count);
    for _ in 0..count {
        let (ln, l) = next()?;
        let mut t = l.split_whitespace();
        let kind = t.next();
        let k: usize = parse(t.next(), ln)?;
        cones.push(match kind {
            Some("zero") => Cone::Zero(k),
            Some("nonneg") => Cone::NonNeg(k),
            Some("psd") => Cone::Psd(k),
            _ => return domain(format!("dump line {ln}: unknown cone")),
        });
    }
    let mut c = vec![0.0; n];
    let mut b = vec![0.0; m];
    let mut trip = Vec::new();
    loop {
        let (ln, l) = match next() {
            Ok(v) => v,
            Err(_) => break,
        };
        let mut t = l.split_whitespace();
        match t.next() {
            None => continue,
            Some("c") => {
                let j: usize = parse(t.next(), ln)?;
                if j >= n {
                    return domain(format!("dump line {ln}: index out of range"));
                }
                c[j] = parse(t.next(), ln)?;
            }
            Some("b") => {
                let i: usize = parse(t.next(), ln)?;
                if i >= m {
                    return domain(format!("dump line {ln}: index out of range"));
                }
                b[i] = parse(t.next(), ln)?;
            }
            Some("A") => {
                let i: usize = parse(t.next(), ln)?;
                let j: usize = parse(t.next(), ln)?;
                trip.push((i, j, parse(t.next(), ln)?));
            }
            Some(_) => return domain(format!("dump line {ln}: unknown record")),
        }
    }
    ConicProblem::new(c, CsrMatrix::from_triplets(m, n, &trip)?, b, cones)
}
