//! Command-line interface.

use std::collections::HashMap;
use std::ffi::OsString;
use std::fs;
use std::io::Write as _;
use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use tablereader_core::ctc::LabelSequence;
use tablereader_core::decode::{
    self, apply_consistency, normalize_family_ditto, Candidates, ConsistencyRule, DecodeParams, Dictionary, FieldPart,
    GenderLexicon, NameParams, RowCandidates, ScoredWord,
};
use tablereader_core::gradcheck::gradient_check;
use tablereader_core::net::{shipped, AlphabetSpec};
use tablereader_core::preproc::{normalize_contrast, normalize_height, segment_field, NormalizationSpec, SegmentParams};
use tablereader_core::train::{self, Checkpoint, Precision, Sample, SplitRatio};
use tablereader_core::{Alphabet, FieldType, Network, NetworkSpec, OutputMatrix, Raster};

use crate::config::{AppConfig, FieldDecodeConfig};
use crate::formats::{self, AnswerRow};
use crate::manifest::{ingest_manifest, ManifestEntry, Transcripts};
use crate::parallel::Parallel;
use crate::{eval, io, synth};

#[derive(Debug, Parser)]
#[command(name = "tablereader", version, about = "Handwritten census table field recognition")]
struct Cli {
    /// JSON configuration file (lowest precedence).
    #[arg(long, global = true, env = "TABLEREADER_CONFIG")]
    config: Option<PathBuf>,
    #[arg(long, global = true, env = "TABLEREADER_SEED")]
    seed: Option<u64>,
    #[arg(long, global = true, value_enum, env = "TABLEREADER_PRECISION")]
    precision: Option<PrecisionArg>,
    /// More log output on stderr (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PrecisionArg {
    Single,
    Double,
}

impl From<PrecisionArg> for Precision {
    fn from(p: PrecisionArg) -> Self {
        match p {
            PrecisionArg::Single => Precision::Single,
            PrecisionArg::Double => Precision::Double,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Cut fields out of pages and normalize them; writes PNGs and a manifest.
    Segment(SegmentArgs),
    /// Train a network on a manifest.
    Train(TrainArgs),
    /// Decode manifest images against dictionaries.
    Decode(DecodeArgs),
    /// Score answers against references.
    Eval(EvalArgs),
    /// Compare analytic and numeric gradients on a desk-scale network.
    Gradcheck(GradcheckArgs),
    /// Print a network descriptor as JSON.
    Spec(SpecArgs),
}

#[derive(Debug, Args)]
struct SegmentArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, env = "TABLEREADER_FIELD_TYPE")]
    field_type: Option<FieldType>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Checkpoint written after every epoch.
    #[arg(long)]
    out: PathBuf,
    /// Network descriptor JSON.
    #[arg(long, conflicts_with = "network")]
    spec: Option<PathBuf>,
    /// Shipped network name (N1 … B2) or `desk`.
    #[arg(long)]
    network: Option<String>,
    #[arg(long, env = "TABLEREADER_FIELD_TYPE")]
    field_type: Option<FieldType>,
    /// Continue from the checkpoint at `--out`.
    #[arg(long)]
    resume: bool,
    #[arg(long)]
    main_epochs: Option<u32>,
    #[arg(long)]
    post_epochs: Option<u32>,
    #[arg(long)]
    samples_per_epoch: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    main_lr: Option<f64>,
    #[arg(long)]
    post_lr: Option<f64>,
    #[arg(long)]
    momentum: Option<f64>,
    #[arg(long)]
    clip_norm: Option<f64>,
    /// Train:validation ratio such as `10:1`.
    #[arg(long, default_value = "10:1")]
    split: String,
}

#[derive(Debug, Args)]
struct DecodeArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Committee checkpoints for `--field-type`.
    #[arg(long, num_args = 1.., env = "TABLEREADER_COMMITTEE", value_delimiter = ',')]
    committee: Vec<PathBuf>,
    #[arg(long, env = "TABLEREADER_DICT")]
    dict: Option<PathBuf>,
    /// NAME: given-name dictionary (`--dict` then holds family names).
    #[arg(long, env = "TABLEREADER_GIVEN_DICT")]
    given_dict: Option<PathBuf>,
    #[arg(long, env = "TABLEREADER_ALPHA")]
    alpha: Option<f64>,
    #[arg(long, env = "TABLEREADER_BETA")]
    beta: Option<f64>,
    #[arg(long)]
    given_alpha: Option<f64>,
    #[arg(long)]
    given_beta: Option<f64>,
    /// Field the committee/dictionary flags apply to; only rows of this
    /// field are decoded unless the config names others.
    #[arg(long, env = "TABLEREADER_FIELD_TYPE")]
    field_type: Option<FieldType>,
    /// Consistency rules file.
    #[arg(long, env = "TABLEREADER_RULES")]
    rules: Option<PathBuf>,
    /// Gender lexicon for the rules (defaults to the built-in one).
    #[arg(long, env = "TABLEREADER_LEXICON")]
    lexicon: Option<PathBuf>,
    /// Alternatives kept per field for the consistency pass.
    #[arg(long, default_value_t = 5)]
    top_k: usize,
    /// NAME: dictionary entries kept per part, most frequent first.
    #[arg(long, default_value_t = 200)]
    name_cap: usize,
    /// Replace ditto family names by the name above.
    #[arg(long)]
    resolve_ditto: bool,
    /// Answers file (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Answers file or manifest.
    #[arg(long)]
    predictions: PathBuf,
    /// Reference manifest or answers file.
    #[arg(long)]
    references: PathBuf,
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 200)]
    samples: usize,
    #[arg(long, default_value_t = 1e-5)]
    step: f64,
    #[arg(long, default_value_t = 1e-4)]
    tolerance: f64,
    /// Network descriptor JSON (default: a small desk network).
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Width of the random input image.
    #[arg(long, default_value_t = 20)]
    width: usize,
}

#[derive(Debug, Args)]
struct SpecArgs {
    /// Shipped network name (N1 … B2) or `desk`.
    #[arg(long)]
    network: String,
    #[arg(long, env = "TABLEREADER_FIELD_TYPE")]
    field_type: Option<FieldType>,
}

/// Runs the program on `argv` (including the program name) and returns the
/// process exit status: 0 on success, 1 on a runtime failure, 2 on a usage
/// error.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new().filter_level(level).parse_env("TABLEREADER_LOG").try_init();
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => AppConfig::load(p)?,
        None => AppConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = Some(s);
    }
    if let Some(p) = cli.precision {
        cfg.precision = Some(p.into());
    }
    match cli.command {
        Command::Segment(a) => segment(a),
        Command::Train(a) => train_cmd(a, &cfg),
        Command::Decode(a) => decode_cmd(a, &cfg),
        Command::Eval(a) => eval_cmd(a),
        Command::Gradcheck(a) => gradcheck_cmd(a, &cfg),
        Command::Spec(a) => {
            println!("{}", network_spec(&a.network, a.field_type, cfg.seed.unwrap_or(1))?.to_json());
            Ok(())
        }
    }
}

fn load_pages(entries: &[ManifestEntry]) -> Result<HashMap<PathBuf, Raster>> {
    let mut paths: Vec<&PathBuf> = entries.iter().map(|e| &e.image).collect();
    paths.sort();
    paths.dedup();
    paths.into_par_iter().map(|p| Ok((p.clone(), io::load_gray(p)?))).collect()
}

/// Cuts the entry's field out of its page (when a polygon is given) and
/// normalizes height and contrast.
fn prepare(entry: &ManifestEntry, page: &Raster, height: usize) -> Result<Raster> {
    let norm = NormalizationSpec { target_height: height, ..NormalizationSpec::for_field(entry.field) };
    let r = match &entry.polygon {
        Some(poly) => {
            let params = SegmentParams { normalization: norm, ..SegmentParams::for_field(entry.field) };
            segment_field(page, poly, &params)?.0
        }
        None => normalize_contrast(&normalize_height(page, height)?, &norm)?,
    };
    Ok(r)
}

fn segment(a: SegmentArgs) -> Result<()> {
    let m = ingest_manifest(&a.manifest, Transcripts::Optional)?;
    let entries: Vec<ManifestEntry> = m.entries.into_iter().filter(|e| a.field_type.is_none_or(|f| e.field == f)).collect();
    let pages = load_pages(&entries)?;
    fs::create_dir_all(&a.out).with_context(|| format!("cannot create {}", a.out.display()))?;
    let names: Vec<String> = entries
        .par_iter()
        .map(|e| {
            let cell = prepare(e, &pages[&e.image], e.field.input_height())
                .with_context(|| format!("row {} {}", e.row_id, e.field))?;
            let name = format!("{}_{}.png", e.row_id, e.field);
            io::save_gray(&a.out.join(&name), &cell)?;
            Ok(name)
        })
        .collect::<Result<_>>()?;
    let mut manifest = String::new();
    for (e, name) in entries.iter().zip(&names) {
        manifest.push_str(&format!("{}\t{}\t{}\t{}\n", e.row_id, e.field, e.transcript, name));
    }
    fs::write(a.out.join("manifest.tsv"), manifest)?;
    println!("segmented {} fields ({} rows dropped)", entries.len(), m.dropped.len());
    Ok(())
}

fn network_spec(name: &str, field: Option<FieldType>, seed: u64) -> Result<NetworkSpec> {
    if name.eq_ignore_ascii_case("desk") {
        let alphabet = field.map_or_else(synth::toy_alphabet_spec, AlphabetSpec::Field);
        return Ok(NetworkSpec::desk("desk", alphabet, 2, [8, 16, 32, 32], seed));
    }
    let net = shipped::find(name).ok_or_else(|| anyhow!("unknown network {name:?}"))?;
    Ok(net.spec())
}

fn parse_split(s: &str) -> Result<SplitRatio> {
    let (t, v) = s.split_once(':').ok_or_else(|| anyhow!("split must look like 10:1"))?;
    Ok(SplitRatio { train: t.trim().parse()?, validation: v.trim().parse()? })
}

fn train_cmd(a: TrainArgs, cfg: &AppConfig) -> Result<()> {
    let mut tc = cfg.effective_train();
    if let Some(name) = &a.network {
        if let Some(s) = train::epoch_schedule(name) {
            tc = tc.with_schedule(s);
        }
    }
    macro_rules! set {
        ($($f:ident),*) => { $(if let Some(v) = a.$f { tc.$f = v; })* };
    }
    set!(main_epochs, post_epochs, samples_per_epoch, batch_size, main_lr, post_lr, momentum);
    if a.clip_norm.is_some() {
        tc.clip_norm = a.clip_norm;
    }
    tc.validate()?;

    let spec = match (&a.spec, &a.network) {
        (Some(p), _) => NetworkSpec::from_json(&io::read_text(p)?)?,
        (None, Some(n)) => network_spec(n, a.field_type, tc.seed)?,
        (None, None) => network_spec("desk", a.field_type, tc.seed)?,
    };
    let alphabet = spec.alphabet()?;
    let m = ingest_manifest(&a.manifest, Transcripts::Required)?;
    let entries: Vec<ManifestEntry> = m.entries.into_iter().filter(|e| a.field_type.is_none_or(|f| e.field == f)).collect();
    let pages = load_pages(&entries)?;
    let samples: Vec<Option<Sample>> = entries
        .par_iter()
        .map(|e| {
            let Ok(labels) = LabelSequence::encode(&e.transcript, &alphabet) else {
                log::warn!("row {} {}: transcript outside the network alphabet", e.row_id, e.field);
                return Ok(None);
            };
            let raster = prepare(e, &pages[&e.image], spec.input_height)?;
            Ok(Some(Sample { raster, labels }))
        })
        .collect::<Result<_>>()?;
    let split = train::split_dataset(samples, parse_split(&a.split)?, tc.seed, Option::is_some)?;
    let train_set: Vec<Sample> = split.train.into_iter().flatten().collect();
    let validation: Vec<Sample> = split.validation.into_iter().flatten().collect();
    log::info!("{} training / {} validation samples, {} unusable", train_set.len(), validation.len(), split.dropped);

    let start = if a.resume {
        let cp = io::load_checkpoint(&a.out)?;
        if cp.spec != spec {
            bail!("checkpoint {} was trained with a different network", a.out.display());
        }
        cp
    } else {
        Checkpoint::initial(spec, tc.seed)?
    };
    let out = a.out.clone();
    let result = train::train_from(&tc, start, &train_set, &validation, &Parallel, |cp| {
        if let Some(r) = cp.history.last() {
            println!("{}", r.log_line());
        }
        io::save_checkpoint(&out, cp).map_err(|e| tablereader_core::Error::Format(format!("{e:#}")))
    });
    match result {
        Ok(cp) => {
            println!("initial validation loss {:.6}", cp.initial_validation_loss);
            Ok(())
        }
        Err(f) => {
            if let Some(cp) = &f.last_good {
                io::save_checkpoint(&a.out, cp)?;
            }
            Err(f.error.into())
        }
    }
}

struct Committee {
    nets: Vec<Network>,
    alphabet: Alphabet,
}

impl Committee {
    fn load(paths: &[PathBuf]) -> Result<Self> {
        if paths.is_empty() {
            bail!("empty committee");
        }
        let nets = paths
            .iter()
            .map(|p| {
                let cp = io::load_checkpoint(p)?;
                Ok(Network::from_parts(cp.spec, cp.weights)?)
            })
            .collect::<Result<Vec<_>>>()?;
        let alphabet = nets[0].alphabet().clone();
        if nets.iter().any(|n| *n.alphabet() != alphabet) {
            bail!("committee members disagree on their output alphabet");
        }
        Ok(Committee { nets, alphabet })
    }

    fn matrices(&self, entry: &ManifestEntry, page: &Raster) -> Result<Vec<OutputMatrix>> {
        let mut cache: HashMap<usize, Raster> = HashMap::new();
        self.nets
            .iter()
            .map(|n| {
                let h = n.spec().input_height;
                let input = match cache.entry(h) {
                    std::collections::hash_map::Entry::Occupied(e) => e.into_mut(),
                    std::collections::hash_map::Entry::Vacant(e) => e.insert(prepare(entry, page, h)?),
                };
                Ok(n.forward(input)?)
            })
            .collect()
    }
}

struct FieldDecoder {
    committee: Committee,
    dict: Dictionary,
    given: Option<Dictionary>,
    params: DecodeParams,
    name: NameParams,
}

fn field_decoder(field: FieldType, a: &DecodeArgs, cfg: &AppConfig) -> Result<FieldDecoder> {
    let mut fc = cfg.fields.get(&field).cloned().unwrap_or_default();
    if a.field_type == Some(field) {
        let FieldDecodeConfig { committee, dict, given_dict, alpha, beta, given_alpha, given_beta } = &mut fc;
        if !a.committee.is_empty() {
            *committee = a.committee.clone();
        }
        for (slot, flag) in [(dict, &a.dict), (given_dict, &a.given_dict)] {
            if flag.is_some() {
                slot.clone_from(flag);
            }
        }
        for (slot, flag) in [(alpha, a.alpha), (beta, a.beta), (given_alpha, a.given_alpha), (given_beta, a.given_beta)] {
            if flag.is_some() {
                *slot = flag;
            }
        }
    }
    let committee = Committee::load(&fc.committee).with_context(|| format!("{field} committee"))?;
    let expected = decode::committee_size(field);
    log::info!("{field}: committee of {} members", committee.nets.len());
    if committee.nets.len() != expected {
        log::info!("{field}: shipped configuration uses {expected} members");
    }
    let dict_path = fc.dict.as_ref().ok_or_else(|| anyhow!("{field}: no dictionary given"))?;
    let dict = formats::load_dictionary(dict_path, &committee.alphabet)?;
    let given = fc.given_dict.as_ref().map(|p| formats::load_dictionary(p, &committee.alphabet)).transpose()?;
    let default = decode::default_params(field);
    let params = DecodeParams::new(fc.alpha.unwrap_or(default.alpha), fc.beta.unwrap_or(default.beta));
    let given_default = decode::decoding_row(FieldType::Name, FieldPart::Given).map_or(default, |r| r.params);
    let name = NameParams {
        family: params,
        given: DecodeParams::new(fc.given_alpha.unwrap_or(given_default.alpha), fc.given_beta.unwrap_or(given_default.beta)),
        cap: a.name_cap,
    };
    params.validate()?;
    name.given.validate()?;
    Ok(FieldDecoder { committee, dict, given, params, name })
}

/// Best answer plus the ranked alternatives the consistency pass may use.
/// For NAME the alternatives are given names under the best family name.
struct Decoded {
    row: AnswerRow,
    family: Option<String>,
    alternatives: Vec<ScoredWord>,
}

fn decode_entry(e: &ManifestEntry, d: &FieldDecoder, page: &Raster, k: usize) -> Result<Decoded> {
    let mats = d.committee.matrices(e, page)?;
    let refs: Vec<&OutputMatrix> = mats.iter().collect();
    let mut row = AnswerRow { row_id: e.row_id.clone(), field: e.field, answer: String::new(), cost: None, member: None };
    if let (FieldType::Name, Some(given)) = (e.field, &d.given) {
        let pairs = decode::name_top_k(&refs, &d.committee.alphabet, &d.dict, given, &d.name, usize::MAX)?;
        let Some(best) = pairs.first() else {
            return Ok(Decoded { row, family: None, alternatives: Vec::new() });
        };
        row.answer = format!("{} {}", best.family.word, best.given.word);
        row.cost = Some(best.cost);
        row.member = Some(best.family.member);
        let family = best.family.word.clone();
        let alternatives = pairs
            .iter()
            .filter(|p| p.family.word == family)
            .take(k)
            .map(|p| ScoredWord { word: p.given.word.clone(), cost: p.cost, member: p.given.member })
            .collect();
        return Ok(Decoded { row, family: Some(family), alternatives });
    }
    let alternatives: Vec<ScoredWord> =
        decode::top_k(&refs, &d.dict, d.params, k.max(1))?.into_iter().filter(ScoredWord::feasible).collect();
    if let Some(best) = alternatives.first() {
        row.answer = best.word.clone();
        row.cost = Some(best.cost);
        row.member = Some(best.member);
    }
    Ok(Decoded { row, family: None, alternatives })
}

fn decode_cmd(a: DecodeArgs, cfg: &AppConfig) -> Result<()> {
    let m = ingest_manifest(&a.manifest, Transcripts::Optional)?;
    let mut fields: Vec<FieldType> = cfg.fields.keys().copied().collect();
    fields.extend(a.field_type);
    fields.sort();
    fields.dedup();
    if fields.is_empty() {
        bail!("nothing to decode: pass --field-type or configure fields");
    }
    let entries: Vec<ManifestEntry> = m.entries.into_iter().filter(|e| fields.contains(&e.field)).collect();
    let decoders: HashMap<FieldType, FieldDecoder> =
        fields.iter().map(|&f| Ok((f, field_decoder(f, &a, cfg)?))).collect::<Result<_>>()?;
    let pages = load_pages(&entries)?;
    let mut decoded: Vec<Decoded> = entries
        .par_iter()
        .map(|e| decode_entry(e, &decoders[&e.field], &pages[&e.image], a.top_k).with_context(|| format!("row {} {}", e.row_id, e.field)))
        .collect::<Result<_>>()?;

    let rules_path = a.rules.clone().or_else(|| cfg.rules.clone());
    if let Some(path) = rules_path {
        let rules = formats::load_rules(&path)?;
        let lexicon = match a.lexicon.clone().or_else(|| cfg.lexicon.clone()) {
            Some(p) => formats::load_lexicon(&p)?,
            None => GenderLexicon::shipped(),
        };
        apply_rules(&mut decoded, &rules, &lexicon);
    }

    let mut rows: Vec<AnswerRow> = decoded.into_iter().map(|d| d.row).collect();
    if a.resolve_ditto {
        let names: Vec<usize> = (0..rows.len()).filter(|&i| rows[i].field == FieldType::Name && !rows[i].answer.is_empty()).collect();
        let families: Vec<String> = names.iter().map(|&i| rows[i].answer.split(' ').next().unwrap_or("").to_string()).collect();
        for (&i, fixed) in names.iter().zip(normalize_family_ditto(&families)) {
            if fixed.unresolved {
                log::warn!("row {}: ditto family name with nothing above it", rows[i].row_id);
            }
            let rest = rows[i].answer.split_once(' ').map_or("", |(_, r)| r).to_string();
            rows[i].answer = if rest.is_empty() { fixed.name } else { format!("{} {rest}", fixed.name) };
        }
    }
    let text = formats::format_answers(&rows);
    match &a.out {
        Some(p) => fs::write(p, text).with_context(|| format!("cannot write {}", p.display()))?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn apply_rules(decoded: &mut [Decoded], rules: &[ConsistencyRule], lexicon: &GenderLexicon) {
    let mut by_row: HashMap<&str, (Option<usize>, Option<usize>)> = HashMap::new();
    for (i, d) in decoded.iter().enumerate() {
        let slot = by_row.entry(d.row.row_id.as_str()).or_default();
        match d.row.field {
            FieldType::Relation => slot.0 = Some(i),
            FieldType::Name if d.family.is_some() => slot.1 = Some(i),
            _ => {}
        }
    }
    let mut pairs: Vec<(usize, usize)> = by_row.into_values().filter_map(|(r, n)| Some((r?, n?))).collect();
    pairs.sort();
    for (ri, ni) in pairs {
        let row = RowCandidates {
            relation: Candidates { alternatives: decoded[ri].alternatives.clone(), chosen: 0 },
            given_name: Candidates { alternatives: decoded[ni].alternatives.clone(), chosen: 0 },
        };
        let (fixed, events) = apply_consistency(&row, rules, lexicon);
        for ev in &events {
            log::info!(
                "row {}: rule {} penalized {:?} (cost {:.4}){}",
                decoded[ri].row.row_id,
                ev.rule,
                ev.original,
                ev.penalized_cost,
                ev.replacement.as_ref().map_or(String::new(), |r| format!(", switched to {r:?}"))
            );
        }
        if let Some(w) = fixed.relation.answer() {
            let r = &mut decoded[ri].row;
            r.answer = w.word.clone();
            r.cost = Some(w.cost);
            r.member = Some(w.member);
        }
        if let Some(w) = fixed.given_name.answer() {
            let family = decoded[ni].family.clone().unwrap_or_default();
            let r = &mut decoded[ni].row;
            r.answer = format!("{family} {}", w.word);
            r.cost = Some(w.cost);
            r.member = Some(w.member);
        }
    }
}

fn eval_cmd(a: EvalArgs) -> Result<()> {
    let preds = formats::parse_labeled(&io::read_text(&a.predictions)?).with_context(|| a.predictions.display().to_string())?;
    let refs = formats::parse_labeled(&io::read_text(&a.references)?).with_context(|| a.references.display().to_string())?;
    let report = eval::evaluate(&preds, &refs);
    if a.json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        println!("{report}");
    }
    Ok(())
}

fn gradcheck_cmd(a: GradcheckArgs, cfg: &AppConfig) -> Result<()> {
    let seed = cfg.seed.unwrap_or(1);
    let spec = match &a.spec {
        Some(p) => NetworkSpec::from_json(&io::read_text(p)?)?,
        None => NetworkSpec::desk("gradcheck", synth::toy_alphabet_spec(), 2, [6, 8, 8, 8], seed),
    };
    let net = Network::new(spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = net.spec().input_height;
    let raster = Raster::new(a.width, h, (0..a.width * h).map(|_| rng.gen()).collect())?;
    let symbols = net.alphabet().symbols().len();
    let labels = LabelSequence::for_alphabet((0..2).map(|_| rng.gen_range(0..symbols)).collect(), net.alphabet())?;
    let report = gradient_check(&net, &raster, &labels, a.samples, a.step, a.tolerance, seed)?;
    println!("max_rel_error\t{:.3e}", report.max_rel_error);
    println!("passed\t{}/{}", report.passed, report.samples);
    if report.pass_fraction() < 0.99 {
        bail!("only {:.1}% of sampled gradients within {}", 100.0 * report.pass_fraction(), a.tolerance);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_parsing() {
        assert_eq!(parse_split("10:1").unwrap(), SplitRatio { train: 10, validation: 1 });
        assert!(parse_split("10").is_err());
    }

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(run_cli(["tablereader", "frobnicate"]), 2);
        assert_eq!(run_cli(["tablereader"]), 2);
        assert_eq!(run_cli(["tablereader", "--help"]), 0);
    }

    #[test]
    fn desk_and_shipped_specs() {
        assert_eq!(network_spec("N1", None, 1).unwrap(), shipped::find("N1").unwrap().spec());
        assert_eq!(network_spec("desk", Some(FieldType::Age), 1).unwrap().output_size().unwrap(), 25);
        assert!(network_spec("Q7", None, 1).is_err());
    }
}
