//! Command-line interface to the cyclic-strata engine.
//!
//! Subcommands cover the smooth theory (`admissible`, `restrict`), analysis
//! of single marked stable curves supplied as JSON files (`validate`,
//! `smoothable`, `stratum-dim`, `maximal`), the group-theoretic side
//! (`extensions`), and the exhaustive stratum census (`census`,
//! `components`).
//!
//! Exit codes: `0` on success, `2` when an input fails validation, `3` when
//! a census ran under caps too tight to be complete.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};
use cyclic_strata::branching::{enumerate_admissible, NumericalType};
use cyclic_strata::census::{
    self, cache_file_name, enumerate_strata, natural_limits, CensusDocument, CensusEntry, Limits,
};
use cyclic_strata::deformation::{dimension_report, smoothability_report};
use cyclic_strata::group_ext::{build_group, enumerate_presentations};
use cyclic_strata::marked_graph::{Analyzed, MarkedGraph};
use cyclic_strata::maximality::{is_maximal, Verdict};

/// Exit code for inputs that fail validation.
const EXIT_INVALID: u8 = 2;
/// Exit code for a census whose caps were too tight to be complete.
const EXIT_SCALE: u8 = 3;

#[derive(Parser)]
#[command(
    name = "cyclic-strata",
    version,
    about = "Effective Z/d actions on smooth and stable curves: branching data, marked graphs, and the stratum census"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// Emit machine-readable JSON instead of text.
    #[arg(long, global = true)]
    json: bool,
    /// Write the output to FILE instead of stdout.
    #[arg(long, global = true, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Worker threads for the census search (default: available cores).
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    /// Cap the number of components of enumerated graphs.
    #[arg(long, global = true, value_name = "N")]
    limit_vertices: Option<u32>,
    /// Cap the number of nodes of enumerated graphs.
    #[arg(long, global = true, value_name = "N")]
    limit_edges: Option<u32>,
}

#[derive(Subcommand)]
enum Cmd {
    /// List the admissible branching data of (g, d), or classify one
    /// sequence given with --seq (exit 2 when it is not admissible).
    Admissible {
        /// Genus of the curve the group acts on.
        #[arg(long, short = 'g')]
        genus: u32,
        /// Order of the cyclic group.
        #[arg(long, short = 'd')]
        order: u32,
        /// Branch-point counts "k1,k2,...,k{d-1}" to classify.
        #[arg(long, value_name = "COUNTS")]
        seq: Option<String>,
    },
    /// Parse and validate a marked-graph JSON file.
    Validate {
        /// Path of the graph file.
        file: PathBuf,
    },
    /// Equivariant smoothability of each node orbit of a marked graph.
    Smoothable {
        /// Path of the graph file.
        file: PathBuf,
    },
    /// Dimension of the stratum of a marked graph, orbit by orbit.
    StratumDim {
        /// Path of the graph file.
        file: PathBuf,
    },
    /// Maximality verdict for the stratum of a marked graph.
    Maximal {
        /// Path of the graph file.
        file: PathBuf,
    },
    /// Restrict branching data to the subgroup of the given order.
    Restrict {
        /// Genus of the curve the group acts on.
        #[arg(long, short = 'g')]
        genus: u32,
        /// Order of the cyclic group.
        #[arg(long, short = 'd')]
        order: u32,
        /// Branch-point counts "k1,k2,...,k{d-1}".
        #[arg(long, value_name = "COUNTS")]
        seq: String,
        /// Order of the subgroup to restrict to (must divide d).
        #[arg(long, value_name = "D'")]
        subgroup: u32,
    },
    /// Presentations of the order-4d extensions of (Z/2)² by Z/d, each
    /// verified against its multiplication table.
    Extensions {
        /// Order of the normal cyclic subgroup.
        #[arg(long, short = 'd')]
        order: u32,
    },
    /// Enumerate the non-smoothable strata of (g, d) as JSONL.
    Census {
        /// Total genus of the stable curves.
        #[arg(long, short = 'g')]
        genus: u32,
        /// Order of the cyclic group.
        #[arg(long, short = 'd')]
        order: u32,
    },
    /// Confirmed boundary components of (g, d): the maximal strata, with
    /// unverifiable ones listed separately.
    Components {
        /// Total genus of the stable curves.
        #[arg(long, short = 'g')]
        genus: u32,
        /// Order of the cyclic group.
        #[arg(long, short = 'd')]
        order: u32,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(EXIT_INVALID)
        }
    }
}

fn run(cli: &Cli) -> Result<ExitCode> {
    match &cli.cmd {
        Cmd::Admissible { genus, order, seq } => admissible(&cli.common, *genus, *order, seq),
        Cmd::Validate { file } => validate(&cli.common, file),
        Cmd::Smoothable { file } => smoothable(&cli.common, file),
        Cmd::StratumDim { file } => stratum_dim(&cli.common, file),
        Cmd::Maximal { file } => maximal(&cli.common, file),
        Cmd::Restrict { genus, order, seq, subgroup } => {
            restrict(&cli.common, *genus, *order, seq, *subgroup)
        }
        Cmd::Extensions { order } => extensions(&cli.common, *order),
        Cmd::Census { genus, order } => census_cmd(&cli.common, *genus, *order, false),
        Cmd::Components { genus, order } => census_cmd(&cli.common, *genus, *order, true),
    }
}

/// Writes the rendered output to `--out` or stdout.
fn emit(common: &Common, text: &str) -> Result<()> {
    match &common.out {
        Some(path) => fs::write(path, text)
            .with_context(|| format!("cannot write output to {}", path.display()))?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
        }
    }
    Ok(())
}

/// Parses "k1,k2,...,k{d-1}" into a validated numerical type.
fn parse_type(genus: u32, order: u32, seq: &str) -> Result<NumericalType> {
    let counts: Vec<u32> = seq
        .split(',')
        .map(|part| {
            part.trim()
                .parse::<u32>()
                .with_context(|| format!("bad count {part:?} in --seq"))
        })
        .collect::<Result<_>>()?;
    NumericalType::new(genus, order, counts)
        .map_err(|e| anyhow!("invalid branching data: {e}"))
}

/// The JSON shape of one numerical type: counts under "k" with siblings
/// "d" and "g", plus quotient genus and dimension when they exist.
fn type_json(t: &NumericalType) -> serde_json::Value {
    let mut value = serde_json::json!({
        "d": t.d(),
        "g": t.g,
        "k": t.seq.counts(),
        "admissible": t.is_admissible(),
    });
    if let Ok(h) = t.quotient_genus() {
        value["h"] = h.into();
    }
    if let Ok(dim) = t.stratum_dimension() {
        value["dimension"] = dim.into();
    }
    value
}

fn type_line(t: &NumericalType) -> String {
    match (t.quotient_genus(), t.stratum_dimension()) {
        (Ok(h), Ok(dim)) => format!("{}  h={h}  dim={dim}", t.seq),
        _ => format!("{}  (not admissible)", t.seq),
    }
}

fn admissible(common: &Common, genus: u32, order: u32, seq: &Option<String>) -> Result<ExitCode> {
    match seq {
        Some(seq) => {
            let t = parse_type(genus, order, seq)?;
            let ok = t.is_admissible();
            if common.json {
                emit(common, &format!("{}\n", type_json(&t)))?;
            } else {
                let status = if ok { "admissible" } else { "not admissible" };
                emit(common, &format!("g={genus} d={order} {}: {status}\n", t.seq))?;
            }
            Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(EXIT_INVALID) })
        }
        None => {
            let types: Vec<NumericalType> = enumerate_admissible(genus, order)
                .into_iter()
                .map(|seq| NumericalType { g: genus, seq })
                .collect();
            let mut text = String::new();
            if common.json {
                let values: Vec<_> = types.iter().map(type_json).collect();
                text = format!("{}\n", serde_json::Value::Array(values));
            } else {
                text.push_str(&format!(
                    "{} admissible branching sequence(s) for g={genus}, d={order}\n",
                    types.len()
                ));
                for t in &types {
                    text.push_str(&format!("  {}\n", type_line(t)));
                }
            }
            emit(common, &text)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

/// Reads and analyzes a marked-graph JSON file.
fn load_graph(file: &Path) -> Result<Analyzed> {
    let text = fs::read_to_string(file)
        .with_context(|| format!("cannot read {}", file.display()))?;
    let graph = MarkedGraph::from_json_str(&text)
        .map_err(|e| anyhow!("{}: not a marked-graph document: {e}", file.display()))?;
    graph
        .analyze()
        .map_err(|e| anyhow!("{}: invalid marked graph: {e}", file.display()))
}

fn validate(common: &Common, file: &Path) -> Result<ExitCode> {
    let analyzed = load_graph(file)?;
    let encoding = hex(&analyzed.canonical_encoding());
    if common.json {
        let value = serde_json::json!({
            "valid": true,
            "d": analyzed.d(),
            "genus": analyzed.total_genus(),
            "vertex_orbits": analyzed.vertex_orbits().len(),
            "edge_orbits": analyzed.edge_orbits().len(),
            "type_encoding": encoding,
        });
        emit(common, &format!("{value}\n"))?;
    } else {
        emit(
            common,
            &format!(
                "valid marked graph: d={} genus={} vertex orbits={} node orbits={}\ntype encoding {}\n",
                analyzed.d(),
                analyzed.total_genus(),
                analyzed.vertex_orbits().len(),
                analyzed.edge_orbits().len(),
                encoding,
            ),
        )?;
    }
    Ok(ExitCode::SUCCESS)
}

fn smoothable(common: &Common, file: &Path) -> Result<ExitCode> {
    let analyzed = load_graph(file)?;
    let report = smoothability_report(&analyzed);
    if common.json {
        emit(common, &format!("{}\n", serde_json::to_string(&report)?))?;
    } else {
        let mut text = String::new();
        for node in &report.nodes {
            text.push_str(&format!(
                "node orbit at edge {}: size={} stab={} character={} smoothable={}\n",
                node.representative_edge,
                node.orbit_size,
                node.stab_order,
                node.character,
                node.smoothable,
            ));
        }
        text.push_str(&format!("fully nonsmoothable: {}\n", report.fully_nonsmoothable));
        emit(common, &text)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn stratum_dim(common: &Common, file: &Path) -> Result<ExitCode> {
    let analyzed = load_graph(file)?;
    let report = dimension_report(&analyzed);
    if common.json {
        emit(common, &format!("{}\n", serde_json::to_string(&report)?))?;
    } else {
        let mut text = String::new();
        for orbit in &report.orbits {
            text.push_str(&format!(
                "orbit at vertex {}: h={} marks={} dim={}\n",
                orbit.representative_vertex, orbit.quotient_genus, orbit.marks, orbit.dimension,
            ));
        }
        text.push_str(&format!("total dimension: {}\n", report.total));
        emit(common, &text)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn maximal(common: &Common, file: &Path) -> Result<ExitCode> {
    let analyzed = load_graph(file)?;
    let report = is_maximal(&analyzed);
    if common.json {
        emit(common, &format!("{}\n", serde_json::to_string(&report)?))?;
    } else {
        let verdict = match &report.verdict {
            Verdict::Maximal => "maximal".to_string(),
            Verdict::NotMaximal(reason) => format!("not maximal ({reason:?})"),
            Verdict::AssumptionsViolated { reasons } => {
                format!("assumptions violated: {}", reasons.join("; "))
            }
            Verdict::Unverifiable { reasons } => {
                format!("assumptions unverifiable: {}", reasons.join("; "))
            }
        };
        let mut text = format!("verdict: {verdict}\n");
        if let Some(order) = report.aut_order {
            text.push_str(&format!("automorphism group order: {order}\n"));
        }
        if let Some(count) = report.order_d_count {
            text.push_str(&format!("elements of order d: {count}\n"));
        }
        emit(common, &text)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn restrict(
    common: &Common,
    genus: u32,
    order: u32,
    seq: &str,
    subgroup: u32,
) -> Result<ExitCode> {
    let t = parse_type(genus, order, seq)?;
    let restricted = t
        .restrict(subgroup)
        .map_err(|e| anyhow!("restriction to order {subgroup} failed: {e}"))?;
    if common.json {
        emit(common, &format!("{}\n", type_json(&restricted)))?;
    } else {
        emit(
            common,
            &format!("restriction to Z/{subgroup}: {}\n", type_line(&restricted)),
        )?;
    }
    Ok(ExitCode::SUCCESS)
}

fn extensions(common: &Common, order: u32) -> Result<ExitCode> {
    let presentations = enumerate_presentations(order);
    let mut verified = 0usize;
    let mut values = Vec::new();
    let mut lines = String::new();
    for p in &presentations {
        let built = build_group(p);
        let ok = built.is_ok();
        if ok {
            verified += 1;
        }
        if common.json {
            values.push(serde_json::json!({
                "d": p.d,
                "l1": p.l1,
                "l2": p.l2,
                "e12": p.e12,
                "f": p.f,
                "order": 4 * p.d,
                "verified": ok,
            }));
        } else {
            lines.push_str(&format!(
                "l1={} l2={} e12={} f={}  order {}  {}\n",
                p.l1,
                p.l2,
                p.e12,
                p.f,
                4 * p.d,
                if ok { "verified" } else { "FAILED" },
            ));
        }
    }
    if common.json {
        emit(common, &format!("{}\n", serde_json::Value::Array(values)))?;
    } else {
        let mut text = format!(
            "{} extension presentation(s) of (Z/2)\u{b2} by Z/{order}, {} verified\n",
            presentations.len(),
            verified
        );
        text.push_str(&lines);
        emit(common, &text)?;
    }
    if verified == presentations.len() {
        Ok(ExitCode::SUCCESS)
    } else {
        Ok(ExitCode::from(EXIT_INVALID))
    }
}

/// Runs (or reloads from cache) the census of `(g, d)` and renders it.
///
/// With `components_only`, the output is the split into confirmed maximal
/// strata and unverifiable ones.  Exit code 3 flags a census whose caps were
/// tighter than the natural bounds.
fn census_cmd(common: &Common, genus: u32, order: u32, components_only: bool) -> Result<ExitCode> {
    let limits = Limits {
        max_vertices: common.limit_vertices,
        max_edges: common.limit_edges,
    };
    let threads = common
        .threads
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let document = cached_census(genus, order, &limits, threads)?;
    let complete = document.header.complete;
    let text = if components_only {
        render_components(common, &document)?
    } else if common.json {
        render_jsonl(&document)
    } else {
        render_census_text(&document)
    };
    emit(common, &text)?;
    if complete {
        Ok(ExitCode::SUCCESS)
    } else {
        Ok(ExitCode::from(EXIT_SCALE))
    }
}

/// Computes the census, reusing a JSONL cache file under
/// `CYCLIC_STRATA_CACHE_DIR` when one matches the header exactly.
fn cached_census(g: u32, d: u32, limits: &Limits, threads: usize) -> Result<CensusDocument> {
    let (nat_v, nat_e) = natural_limits(g);
    let eff_v = limits.max_vertices.map_or(nat_v, |v| v.min(nat_v));
    let eff_e = limits.max_edges.map_or(nat_e, |e| e.min(nat_e));
    let cache_path = std::env::var_os("CYCLIC_STRATA_CACHE_DIR")
        .map(|dir| PathBuf::from(dir).join(cache_file_name(g, d, eff_v, eff_e)));
    if let Some(path) = &cache_path {
        if let Ok(text) = fs::read_to_string(path) {
            match census::parse_jsonl(&text) {
                Ok(doc)
                    if doc.header.g == g
                        && doc.header.d == d
                        && doc.header.max_vertices == eff_v
                        && doc.header.max_edges == eff_e =>
                {
                    return Ok(doc);
                }
                _ => eprintln!(
                    "warning: ignoring stale census cache {}",
                    path.display()
                ),
            }
        }
    }
    let census = enumerate_strata(g, d, limits, threads)
        .map_err(|e| anyhow!("census failed: {e}"))?;
    let jsonl = census.to_jsonl();
    if let Some(path) = &cache_path {
        let write = path
            .parent()
            .map_or(Ok(()), fs::create_dir_all)
            .and_then(|()| fs::write(path, &jsonl));
        if let Err(e) = write {
            eprintln!("warning: cannot write census cache {}: {e}", path.display());
        }
    }
    census::parse_jsonl(&jsonl).map_err(|e| anyhow!("round-trip failed: {e}"))
}

/// Re-renders a census document as JSONL, byte-identical to the engine's
/// own export.
fn render_jsonl(doc: &CensusDocument) -> String {
    let mut out = serde_json::to_string(&doc.header).expect("header serialises");
    out.push('\n');
    for entry in &doc.entries {
        out.push_str(&serde_json::to_string(entry).expect("entry serialises"));
        out.push('\n');
    }
    out
}

fn verdict_tag(entry: &CensusEntry) -> String {
    let tag = serde_json::to_string(&entry.verdict)
        .expect("verdict serialises")
        .trim_matches('"')
        .to_string();
    match &entry.reason {
        Some(reason) => {
            let r = serde_json::to_string(reason)
                .expect("witness kind serialises")
                .trim_matches('"')
                .to_string();
            format!("{tag} ({r})")
        }
        None => tag,
    }
}

fn entry_line(entry: &CensusEntry) -> String {
    format!(
        "  {}  dim={}  {}\n",
        short_hex(&entry.type_encoding),
        entry.dimension,
        verdict_tag(entry),
    )
}

fn render_census_text(doc: &CensusDocument) -> String {
    let header = &doc.header;
    let mut text = format!(
        "census g={} d={}: {} stratum/strata ({})\n",
        header.g,
        header.d,
        header.entries,
        if header.complete { "complete" } else { "PARTIAL: caps were tighter than the natural bounds" },
    );
    for entry in &doc.entries {
        text.push_str(&entry_line(entry));
    }
    text
}

fn render_components(common: &Common, doc: &CensusDocument) -> Result<String> {
    let view = census::components(&doc.entries);
    if common.json {
        let value = serde_json::json!({
            "schema": census::CENSUS_SCHEMA,
            "kind": "components",
            "g": doc.header.g,
            "d": doc.header.d,
            "complete": doc.header.complete,
            "maximal": view.maximal,
            "unverifiable": view.unverifiable,
        });
        Ok(format!("{}\n", serde_json::to_string(&value)?))
    } else {
        let mut text = format!(
            "components g={} d={}: {} confirmed maximal, {} unverifiable\n",
            doc.header.g,
            doc.header.d,
            view.maximal.len(),
            view.unverifiable.len(),
        );
        text.push_str("confirmed maximal strata:\n");
        for entry in &view.maximal {
            text.push_str(&entry_line(entry));
        }
        text.push_str("unverifiable strata (listed separately, never merged):\n");
        for entry in &view.unverifiable {
            text.push_str(&entry_line(entry));
        }
        Ok(text)
    }
}

fn hex(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        s.push_str(&format!("{b:02x}"));
    }
    s
}

/// Truncates a long hex encoding for tabular output.
fn short_hex(full: &str) -> String {
    if full.len() <= 20 {
        full.to_string()
    } else {
        format!("{}\u{2026}", &full[..20])
    }
}
