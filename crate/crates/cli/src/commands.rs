use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context as _, Result};

use nlo_core::gateway::{Backend, FixtureEntry, FixtureKey, FixtureStore, HttpBackend, HttpConfig, ReplayBackend};
use nlo_core::generation::{
    builtin_set, generate_constrained, generate_outline_with, load_dir, FewShotExample, PromptConfig,
    RequestOptions, Severity, Technique,
};
use nlo_core::maintenance::{finish_changes_with, EditSession};
use nlo_core::outline::{extract, remap_anchors, render_interleaved, render_standalone, validate};
use nlo_core::triage::{render_histogram, score_histogram, triage, TriageConfig, TriageRecord};
use nlo_core::virtual_split::{render_html, render_json, render_terminal, virtual_split, ChangeList};
use nlo_core::workbench::{
    evaluate_corpus, render_eval_table, sidecar_path, sidecar_read, sidecar_write, CorpusEntry,
};
use nlo_core::{Outline, OutlineError, SourceUnit};

use crate::config::{BackendKind, Config, DEFAULT_API_KEY_ENV};
use crate::{Cli, Command, FixturesAction, Global, ReportFormat, Reported, SplitFormat};

const DEFAULT_STORE: &str = "fixtures";
const DEFAULT_PROVIDER: &str = "fixture";
const DEFAULT_MODEL: &str = "default";
const DEFAULT_POINTER: &str = "/choices/0/message/content";

struct Context {
    config: Config,
    global: Global,
}

impl Context {
    fn options(&self) -> RequestOptions {
        RequestOptions {
            temperature: self.config.temperature.unwrap_or(0.0),
            max_output: self.config.max_output,
        }
    }

    fn store_dir(&self) -> PathBuf {
        match (&self.global.store, &self.config.backend.store) {
            (Some(dir), _) => dir.clone(),
            (None, Some(dir)) => self.config.resolve(dir),
            (None, None) => PathBuf::from(DEFAULT_STORE),
        }
    }

    fn store(&self) -> Result<Arc<FixtureStore>> {
        let dir = self.store_dir();
        let store = FixtureStore::open(&dir).with_context(|| format!("opening fixture store {}", dir.display()))?;
        Ok(Arc::new(store))
    }

    fn http_config(&self, model: Option<&str>) -> Option<HttpConfig> {
        let mut http = match (&self.config.backend.http, &self.global.url) {
            (Some(http), _) => http.clone(),
            (None, Some(url)) => HttpConfig {
                provider: "http".into(),
                url: url.clone(),
                model: DEFAULT_MODEL.into(),
                style: Default::default(),
                response_pointer: DEFAULT_POINTER.into(),
                api_key_env: None,
            },
            (None, None) => return None,
        };
        if let Some(url) = &self.global.url {
            http.url = url.clone();
        }
        if let Some(provider) = &self.global.provider {
            http.provider = provider.clone();
        }
        if let Some(m) = model.or(self.global.model.as_deref()).or(self.config.backend.model.as_deref()) {
            http.model = m.to_string();
        }
        http.api_key_env.get_or_insert_with(|| DEFAULT_API_KEY_ENV.to_string());
        Some(http)
    }

    /// (provider, model) used in fixture keys for strict replay.
    fn replay_identity(&self, model: Option<&str>) -> (String, String) {
        let http = self.config.backend.http.as_ref();
        let provider = self
            .global
            .provider
            .clone()
            .or_else(|| self.config.backend.provider.clone())
            .or_else(|| http.map(|h| h.provider.clone()))
            .unwrap_or_else(|| DEFAULT_PROVIDER.into());
        let model = model
            .map(str::to_string)
            .or_else(|| self.global.model.clone())
            .or_else(|| self.config.backend.model.clone())
            .or_else(|| http.map(|h| h.model.clone()))
            .unwrap_or_else(|| DEFAULT_MODEL.into());
        (provider, model)
    }

    fn backend_with(&self, store: &Arc<FixtureStore>, model: Option<&str>) -> Result<Box<dyn Backend>> {
        let kind = self.global.backend.or(self.config.backend.kind).unwrap_or_default();
        let record = self.global.record || self.config.backend.record;
        let live = || -> Result<Box<dyn Backend>> {
            let http = self
                .http_config(model)
                .context("no HTTP backend configured; set [backend.http] or pass --url")?;
            Ok(Box::new(HttpBackend::new(http)?))
        };
        Ok(match (kind, record) {
            (_, true) => Box::new(ReplayBackend::recording(live()?, store.clone())),
            (BackendKind::Http, false) => live()?,
            (BackendKind::Replay, false) => {
                let (provider, model) = self.replay_identity(model);
                Box::new(ReplayBackend::strict(provider, model, store.clone()))
            }
        })
    }

    fn backend(&self) -> Result<Box<dyn Backend>> {
        self.backend_with(&self.store()?, None)
    }

    fn few_shots(&self) -> Result<Vec<FewShotExample>> {
        let name = self.config.few_shots.as_deref().unwrap_or("default");
        let dir = self.config.resolve(Path::new(name));
        if dir.is_dir() {
            return Ok(load_dir(&dir)?);
        }
        Ok(builtin_set(name)?)
    }

    fn read_unit(&self, path: &Path) -> Result<SourceUnit> {
        let profile = self.config.profile_for(path, self.global.profile.as_deref())?;
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Ok(SourceUnit::from_text(&text, profile))
    }

    /// Files of `dir` the profile lookup understands, sorted by name.
    fn code_files(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let mut files = Vec::new();
        for entry in fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))? {
            let path = entry?.path();
            let known = self.global.profile.is_some() || self.config.detect_profile(&path).is_some();
            if path.is_file() && known && !path.to_string_lossy().ends_with(".nlo.json") {
                files.push(path);
            }
        }
        files.sort();
        Ok(files)
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn file_name(path: &Path) -> String {
    path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Splits a file into bare code and the outline in its star comments.
fn read_annotated(ctx: &Context, path: &Path) -> Result<(SourceUnit, Outline)> {
    let (unit, outline) = extract(&ctx.read_unit(path)?)?;
    let violations = validate(&outline, &unit);
    if !violations.is_empty() {
        return Err(OutlineError::Placement(violations).into());
    }
    Ok((unit, outline))
}

pub fn run(cli: Cli) -> Result<Option<Reported>> {
    let config = match &cli.global.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    let ctx = Context {
        config,
        global: cli.global,
    };
    match cli.command {
        Command::Gen {
            file,
            technique,
            constrained,
            save,
            format,
        } => gen(&ctx, &file, technique.into(), constrained, save, format),
        Command::Render {
            file,
            in_place,
            standalone,
        } => render(&file, in_place, standalone),
        Command::Extract { file, in_place } => extract_cmd(&ctx, &file, in_place),
        Command::Check { file } => check(&ctx, &file),
        Command::Finish { file, apply } => finish(&ctx, &file, apply),
        Command::Split {
            diff,
            description,
            description_file,
            format,
            output,
        } => split(&ctx, &diff, description, description_file, format, output),
        Command::Triage { path, width } => triage_cmd(&ctx, &path, width),
        Command::Eval {
            corpus,
            techniques,
            models,
            format,
        } => eval(&ctx, &corpus, techniques, models, format),
        Command::Fixtures { action } => fixtures(&ctx, action),
    }
}

fn gen(
    ctx: &Context,
    file: &Path,
    technique: Technique,
    constrained: bool,
    save: bool,
    format: ReportFormat,
) -> Result<Option<Reported>> {
    let (unit, _) = extract(&ctx.read_unit(file)?)?;
    let config = PromptConfig::with_few_shots(technique, ctx.few_shots()?);
    let backend = ctx.backend()?;
    let (report, acceptance) = if constrained {
        let c = generate_constrained(&unit, &config, &*backend, &ctx.options())?;
        (c.report, Some(c.acceptance))
    } else {
        (generate_outline_with(&unit, &config, &*backend, &ctx.options())?, None)
    };
    match format {
        ReportFormat::Text => {
            print!("{}", render_interleaved(&unit, &report.outline)?.to_text());
            for issue in &report.issues {
                let level = match issue.severity {
                    Severity::Major => "error",
                    Severity::Minor => "warning",
                };
                eprintln!("{level}: {issue}");
            }
        }
        ReportFormat::Json => {
            let value = serde_json::json!({ "report": report, "acceptance": acceptance });
            println!("{}", serde_json::to_string_pretty(&value)?);
        }
    }
    let rejected = acceptance.as_ref().is_some_and(|a| !a.accepted);
    if let Some(line) = acceptance.as_ref().and_then(|a| a.first_violation) {
        eprintln!("error: response leaves the placement constraint at line {line}");
    }
    if save {
        sidecar_write(&unit, &report.outline, file)?;
    }
    Ok((report.has_major() || rejected).then_some(Reported))
}

fn render(file: &Path, in_place: bool, standalone: bool) -> Result<Option<Reported>> {
    let state = sidecar_read(file)?;
    if state.stale {
        eprintln!("error: {} changed after its outline was stored", file.display());
        return Ok(Some(Reported));
    }
    let unit = state.record.unit()?;
    let outline = state.record.outline();
    if standalone {
        println!("{}", render_standalone(&unit, &outline)?);
        return Ok(None);
    }
    let annotated = render_interleaved(&unit, &outline)?.to_text();
    if in_place {
        write_file(file, &annotated)?;
    } else {
        print!("{annotated}");
    }
    Ok(None)
}

fn extract_cmd(ctx: &Context, file: &Path, in_place: bool) -> Result<Option<Reported>> {
    let (unit, outline) = read_annotated(ctx, file)?;
    if in_place {
        write_file(file, &unit.to_text())?;
        sidecar_write(&unit, &outline, file)?;
        eprintln!("stored {} statements in {}", outline.len(), sidecar_path(file).display());
    } else if !outline.is_empty() {
        println!("{}", outline.to_infilling_text());
    }
    Ok(None)
}

fn check(ctx: &Context, file: &Path) -> Result<Option<Reported>> {
    let (_, inline) = read_annotated(ctx, file)?;
    if !inline.is_empty() {
        println!("ok: {} statements in star comments", inline.len());
        return Ok(None);
    }
    if !sidecar_path(file).exists() {
        eprintln!("error: {} has no outline", file.display());
        return Ok(Some(Reported));
    }
    let state = sidecar_read(file)?;
    if state.stale {
        println!("stale: {} changed after its outline was stored", file.display());
        return Ok(Some(Reported));
    }
    println!("ok: {} statements in {}", state.record.statements.len(), sidecar_path(file).display());
    Ok(None)
}

fn finish(ctx: &Context, file: &Path, apply: bool) -> Result<Option<Reported>> {
    let state = sidecar_read(file).context("finish compares against the stored outline; save one first")?;
    let old_unit = state.record.unit()?;
    let old_outline = state.record.outline();
    let text = fs::read_to_string(file).with_context(|| format!("reading {}", file.display()))?;
    let (unit, inline) = extract(&SourceUnit::from_text(&text, state.record.profile.clone()))?;
    let star = !inline.is_empty();
    let current_outline = if star {
        inline
    } else {
        remap_anchors(&old_outline, &old_unit, &unit).0
    };
    let session = EditSession::new(old_unit, old_outline, unit, current_outline)?;
    let backend = ctx.backend()?;
    let result = finish_changes_with(&session, &*backend, &ctx.options())?;
    if !result.reasoning.is_empty() {
        eprintln!("{}", result.reasoning);
    }
    print!("{}", result.diff);
    if apply {
        let written = if star {
            result.annotated().to_text()
        } else {
            result.new_unit.to_text()
        };
        write_file(file, &written)?;
        sidecar_write(&result.new_unit, &result.new_outline, file)?;
    }
    Ok(None)
}

fn split(
    ctx: &Context,
    diff: &Path,
    description: String,
    description_file: Option<PathBuf>,
    format: SplitFormat,
    output: Option<PathBuf>,
) -> Result<Option<Reported>> {
    let text = fs::read_to_string(diff).with_context(|| format!("reading {}", diff.display()))?;
    let description = match description_file {
        Some(path) => fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?,
        None => description,
    };
    let cl = ChangeList::parse(description.trim_end(), &text)?;
    let backend = ctx.backend()?;
    let split = virtual_split(&cl, &*backend, &ctx.options())?;
    for file in &split.files {
        for issue in &file.issues {
            eprintln!("warning: {}: {issue}", file.path);
        }
    }
    let rendered = match format {
        SplitFormat::Terminal => render_terminal(&split, &cl),
        SplitFormat::Json => render_json(&split),
        SplitFormat::Html => render_html(&split, &cl),
    };
    match output {
        Some(path) => write_file(&path, &rendered)?,
        None => print!("{rendered}"),
    }
    Ok(None)
}

fn triage_cmd(ctx: &Context, path: &Path, width: Option<usize>) -> Result<Option<Reported>> {
    let files = if path.is_dir() {
        ctx.code_files(path)?
    } else {
        vec![path.to_path_buf()]
    };
    let config = TriageConfig {
        summary_line_width: width,
        ..TriageConfig::default()
    };
    let backend = ctx.backend()?;
    let mut predictions = Vec::with_capacity(files.len());
    for file in &files {
        let prediction = triage(&ctx.read_unit(file)?, &config, &*backend, &ctx.options())?;
        let record = TriageRecord::new(file_name(file), prediction);
        if !record.consistent {
            eprintln!("warning: {}: score and notes disagree", record.name);
        }
        println!("{}", serde_json::to_string(&record)?);
        predictions.push(record.prediction);
    }
    if files.len() > 1 {
        eprint!("{}", render_histogram(&score_histogram(&predictions)));
    }
    Ok(None)
}

fn eval(
    ctx: &Context,
    corpus_dir: &Path,
    techniques: Vec<crate::TechniqueArg>,
    models: Vec<String>,
    format: ReportFormat,
) -> Result<Option<Reported>> {
    let corpus = ctx
        .code_files(corpus_dir)?
        .iter()
        .map(|path| {
            Ok(CorpusEntry {
                name: file_name(path),
                unit: ctx.read_unit(path)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let techniques: Vec<Technique> = if techniques.is_empty() {
        vec![Technique::Interleaved, Technique::Infilling]
    } else {
        techniques.into_iter().map(Into::into).collect()
    };
    let few_shots = ctx.few_shots()?;
    let configs: Vec<PromptConfig> = techniques
        .into_iter()
        .map(|t| PromptConfig::with_few_shots(t, few_shots.clone()))
        .collect();
    let store = ctx.store()?;
    let backends = if models.is_empty() {
        vec![ctx.backend_with(&store, None)?]
    } else {
        models
            .iter()
            .map(|m| ctx.backend_with(&store, Some(m)))
            .collect::<Result<Vec<_>>>()?
    };
    let refs: Vec<&dyn Backend> = backends.iter().map(|b| &**b as &dyn Backend).collect();
    let table = evaluate_corpus(&corpus, &configs, &refs, &ctx.options())?;
    match format {
        ReportFormat::Text => print!("{}", render_eval_table(&table)),
        ReportFormat::Json => println!("{}", serde_json::to_string_pretty(&table)?),
    }
    Ok(None)
}

fn fixtures(ctx: &Context, action: FixturesAction) -> Result<Option<Reported>> {
    let store = ctx.store()?;
    let pending_dir = ctx.store_dir().join("pending");
    match action {
        FixturesAction::List => {
            for (key, entry) in store.entries() {
                println!("{key}  {}  {}  {}", entry.backend, entry.model, entry.preview.replace('\n', " "));
            }
        }
        FixturesAction::Show { key } => match store.get(&FixtureKey(key.clone())) {
            Some(text) => print!("{text}"),
            None => bail!("no fixture {key}"),
        },
        FixturesAction::Pending => {
            let mut keys = Vec::new();
            if pending_dir.is_dir() {
                for entry in fs::read_dir(&pending_dir)? {
                    let name = entry?.file_name().to_string_lossy().into_owned();
                    if let Some(key) = name.strip_suffix(".prompt.txt") {
                        keys.push(key.to_string());
                    }
                }
            }
            keys.sort();
            for key in keys {
                println!("{key}  {}", pending_dir.join(format!("{key}.prompt.txt")).display());
            }
        }
        FixturesAction::Answer { key, response } => {
            let text = fs::read_to_string(&response).with_context(|| format!("reading {}", response.display()))?;
            let prompt_file = pending_dir.join(format!("{key}.prompt.txt"));
            let preview = fs::read_to_string(&prompt_file)
                .map(|p| match p.rfind("USER:\n") {
                    Some(i) => p[i + 6..].chars().take(80).collect(),
                    None => String::new(),
                })
                .unwrap_or_default();
            let (backend, model) = ctx.replay_identity(None);
            store.insert(FixtureKey(key), FixtureEntry { backend, model, preview }, text)?;
            if prompt_file.exists() {
                fs::remove_file(&prompt_file)?;
            }
        }
    }
    Ok(None)
}
