//! Edge-list text format: one `i j` pair per line, 1-based ids. Blank lines and
//! `#` comments are skipped; an optional `# n <count>` header fixes the node
//! count so trailing isolated nodes survive a round trip.

use std::io::{BufRead, Write};

use super::Network;
use crate::error::{Error, Result};

pub fn write_edge_list<W: Write>(net: &Network, mut w: W) -> Result<()> {
    writeln!(w, "# n {}", net.n())?;
    for (i, j) in net.edges() {
        writeln!(w, "{} {}", i + 1, j + 1)?;
    }
    Ok(())
}

pub fn read_edge_list<R: BufRead>(r: R) -> Result<Network> {
    let mut declared: Option<usize> = None;
    let mut edges = Vec::new();
    let mut max_id = 0usize;
    for (idx, line) in r.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        if let Some(rest) = t.strip_prefix('#') {
            let mut parts = rest.split_whitespace();
            if parts.next() == Some("n") {
                let v = parts.next().and_then(|s| s.parse().ok()).ok_or(Error::Parse {
                    line: line_no,
                    msg: "malformed `# n <count>` header".into(),
                })?;
                declared = Some(v);
            }
            continue;
        }
        let mut parts = t.split_whitespace();
        let mut id = || -> Result<usize> {
            let tok = parts.next().ok_or(Error::Parse { line: line_no, msg: "expected two node ids".into() })?;
            let v: usize = tok
                .parse()
                .map_err(|_| Error::Parse { line: line_no, msg: format!("bad node id `{tok}`") })?;
            if v == 0 {
                return Err(Error::Parse { line: line_no, msg: "node ids are 1-based".into() });
            }
            Ok(v)
        };
        let (a, b) = (id()?, id()?);
        if parts.next().is_some() {
            return Err(Error::Parse { line: line_no, msg: "trailing tokens".into() });
        }
        max_id = max_id.max(a).max(b);
        edges.push((a - 1, b - 1));
    }
    let n = match declared {
        Some(n) if n < max_id => {
            return Err(Error::Parse { line: 1, msg: format!("header n = {n} but id {max_id} appears") })
        }
        Some(n) => n,
        None => max_id,
    };
    Network::from_edges(n, &edges)
}
