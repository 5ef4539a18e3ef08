//! CSV outputs. Every file starts with a `# schema:` line naming its format
//! and version.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};

use crate::run::RunRecord;

pub const RUNS_SCHEMA: &str = "# schema: rbffd-runs v1";
pub const SPECTRUM_SCHEMA: &str = "# schema: rbffd-spectrum v1";

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

pub fn write_runs<W: Write>(mut w: W, records: &[RunRecord]) -> Result<()> {
    writeln!(w, "{RUNS_SCHEMA}")?;
    let mut csv = csv::Writer::from_writer(w);
    if records.is_empty() {
        csv.flush()?;
        return Ok(());
    }
    for r in records {
        csv.serialize(r)?;
    }
    csv.flush()?;
    Ok(())
}

pub fn write_runs_file(path: &Path, records: &[RunRecord]) -> Result<()> {
    write_runs(create(path)?, records)
}

pub fn write_spectrum<W: Write>(mut w: W, eigenvalues: &[(f64, f64)]) -> Result<()> {
    writeln!(w, "{SPECTRUM_SCHEMA}")?;
    writeln!(w, "real,imag")?;
    for (re, im) in eigenvalues {
        writeln!(w, "{re:e},{im:e}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_spectrum_file(path: &Path, eigenvalues: &[(f64, f64)]) -> Result<()> {
    write_spectrum(create(path)?, eigenvalues)
}

pub fn write_nodes_file(path: &Path, nodes: &rbffd::nodegen::NodeSet) -> Result<()> {
    let mut w = create(path)?;
    nodes.write_csv(&mut w)?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::run::{run_case, CaseSpec};

    #[test]
    fn runs_csv_has_schema_header_and_columns() {
        let record = run_case(&CaseSpec::benchmark(1, 2, 0.02)).unwrap();
        let mut buf = Vec::new();
        write_runs(&mut buf, &[record.clone(), record]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(RUNS_SCHEMA));
        let header = lines.next().unwrap();
        assert!(header.starts_with("d,m,phs_k,n,h,N,ghost_nodes,e1,e2,e_inf,diverged,t_node_positioning"));
        assert_eq!(lines.count(), 2);
    }

    #[test]
    fn spectrum_csv() {
        let mut buf = Vec::new();
        write_spectrum(&mut buf, &[(-1.0, 0.5), (-2.0, 0.0)]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), format!("{SPECTRUM_SCHEMA}\nreal,imag\n-1e0,5e-1\n-2e0,0e0\n"));
    }
}
