//! Channel specs for the builtin channels and a table of reference values.

use std::fmt::Write as _;
use std::path::Path;

use choi_divergence::channel::{
    amplitude_damping, dephasing, depolarizing, identity, replacer, ChannelSpec, KrausChannel,
};
use choi_divergence::linalg::HermitianMatrix;
use choi_divergence::Result;

/// Files written by [`emit`], sorted.
pub const MANIFEST: &[&str] = &[
    "README.md",
    "ad05.json",
    "deph03.json",
    "deph06.json",
    "depol025.json",
    "depol05.json",
    "depol075.json",
    "h01.json",
    "id.json",
    "id3.json",
    "replacer.json",
];

fn channels() -> Result<Vec<(&'static str, KrausChannel)>> {
    Ok(vec![
        ("ad05.json", amplitude_damping(0.5)?),
        ("deph03.json", dephasing(2, 0.3)?),
        ("deph06.json", dephasing(2, 0.6)?),
        ("depol025.json", depolarizing(2, 0.25)?),
        ("depol05.json", depolarizing(2, 0.5)?),
        ("depol075.json", depolarizing(2, 0.75)?),
        ("id.json", identity(2)?),
        ("id3.json", identity(3)?),
        ("replacer.json", replacer(2, &HermitianMatrix::from_real_diagonal(&[0.7, 0.3]))?),
    ])
}

fn readme() -> String {
    let depol = |p: f64| -(1.0 - 0.75 * p).ln();
    let deph = 0.85 * (0.85f64 / 0.7).ln() + 0.15 * 0.5f64.ln();
    let rows = [
        ("bounds --n id.json --m id.json", "0".to_string(), "identical channels"),
        ("bounds --n id.json --m depol025.json", format!("{:.7}", depol(0.25)), "-ln(1 - 3p/4)"),
        ("bounds --n id.json --m depol05.json", format!("{:.7}", depol(0.5)), "-ln(1 - 3p/4)"),
        ("bounds --n id.json --m depol075.json", format!("{:.7}", depol(0.75)), "-ln(1 - 3p/4)"),
        ("bounds --n deph03.json --m deph06.json", format!("{deph:.7}"), "binary relative entropy of the coherences"),
        ("bounds --n id.json --m ad05.json", "inf (exit 2)".to_string(), "support of the identity Choi matrix not covered"),
        (
            "bounds --n deph03.json --m depol05.json --energy h01.json --E 0",
            format!("{:.7}", (4.0f64 / 3.0).ln()),
            "input pinned to the ground state of h01: ln(4/3)",
        ),
        ("resource --n id.json --free replacer", format!("{:.7}", 2.0 * 2f64.ln()), "2 ln 2, mutual information of the qubit identity"),
        ("resource --n id3.json --free replacer", format!("{:.7}", 2.0 * 3f64.ln()), "2 ln 3"),
    ];
    let mut s = String::from(
        "# Example channels\n\n\
         Channel specs in Kraus form for the builtin channels, and reference values of\n\
         the channel relative entropy in nats. `h01.json` is the Hamiltonian `diag(0, 1)`.\n\n\
         | command | expected | reference |\n|---|---|---|\n",
    );
    for (cmd, v, why) in rows {
        writeln!(s, "| `{cmd}` | {v} | {why} |").expect("writing to a string");
    }
    s
}

/// Writes every file of [`MANIFEST`] into `dir` and returns the names.
pub fn emit(dir: &Path) -> std::result::Result<Vec<String>, String> {
    std::fs::create_dir_all(dir).map_err(|e| e.to_string())?;
    let write = |name: &str, text: String| std::fs::write(dir.join(name), text).map_err(|e| format!("{name}: {e}"));
    for (name, ch) in channels().map_err(|e| e.to_string())? {
        let text = serde_json::to_string_pretty(&ChannelSpec::from_kraus(&ch)).map_err(|e| e.to_string())?;
        write(name, text + "\n")?;
    }
    write("h01.json", "[0, 0, 0, 1]\n".into())?;
    write("README.md", readme())?;
    Ok(MANIFEST.iter().map(|s| s.to_string()).collect())
}
