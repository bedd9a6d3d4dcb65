//! Report output: machine-parseable line-delimited records first, with the
//! human table rendered from the same data. Files are written atomically
//! (temp-then-rename) so interrupted runs never leave partial records.

use std::io::Write;
use std::path::Path;

use anyhow::Context;
use serde::Serialize;
use soundscene_core::metrics::{ClipEval, CorpusSummary};

pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> anyhow::Result<()> {
    let mut buf = Vec::new();
    for r in records {
        serde_json::to_writer(&mut buf, r)?;
        buf.push(b'\n');
    }
    atomic_write(path, &buf)
}

pub fn atomic_write(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let tmp = dir.join(format!(
        ".{}.tmp{}",
        path.file_name().and_then(|n| n.to_str()).unwrap_or("out"),
        std::process::id()
    ));
    std::fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
    std::fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

pub fn print_eval_table(clips: &[ClipEval], summary: &CorpusSummary) {
    println!("{:<20} {:>6} {:>8} {:>8} {:>10}", "clip", "Acc1", "Acc2", "Acc3", "CA-SDRi");
    for c in clips {
        let sdri = c.ca_sdri.map_or("-".to_string(), |v| format!("{v:.3}"));
        println!(
            "{:<20} {:>6} {:>8.3} {:>8.3} {:>10}",
            c.clip_id, c.set_accuracy, c.macro_accuracy, c.fp_penalized, sdri
        );
    }
    let sdri = summary.ca_sdri.map_or("-".to_string(), |v| format!("{v:.3}"));
    println!(
        "{:<20} {:>6.3} {:>8.3} {:>8.3} {:>10}",
        format!("MEAN ({} clips)", summary.n_clips),
        summary.set_accuracy,
        summary.macro_accuracy,
        summary.fp_penalized,
        sdri
    );
}

pub fn print_audit_table(audits: &[soundscene_core::dataset::ClassAudit]) {
    println!(
        "{:<22} {:>9} {:>7} {:>14} {:>7} {:>7}",
        "class", "original", "short", "heterogeneous", "added", "final"
    );
    let mut writer = std::io::stdout().lock();
    for a in audits {
        let _ = writeln!(
            writer,
            "{:<22} {:>9} {:>7} {:>14} {:>7} {:>7}",
            a.class, a.original, a.short_removed, a.heterogeneous_removed, a.added, a.final_count
        );
    }
}
