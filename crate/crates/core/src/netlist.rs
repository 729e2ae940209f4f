//! SPICE-like netlist grammar.
//!
//! One card per line, `*` starts a comment line, keywords are
//! case-insensitive:
//!
//! ```text
//! .model <name> memristor [kp=] [wl=] [vthn=] [vcm=] [vdd=] [cm=] [ibias=] [gm0=] [gleak=] [tauleak=] [level=]
//! V<id> <n+> <n-> dc <v> | sin(<off> <amp> <freq> [phase]) | pulse(<v0> <v1> <td> <tr> <tf> <pw> <per>) | pwl(<t1> <v1> ...)
//! R<id> <a> <b> <ohms>
//! S<id> <a> <b> on|off [ron=<ohms>] [goff=<S>]
//! X<id> <a> <b> <model> [vg0=<volts>]
//! .tran <dt> <tstop>
//! .strobe high|low|window <t_on> <t_off>|pwl <t1> <l1> ...
//! .end
//! ```
//!
//! Node `0` is ground. Other nodes are created on first reference.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::{self, Write as _};

use crate::devices::{DeviceLevel, MemristorParams, ParamError, SourceSpec, SwitchParams, SwitchPosition};

/// Index into a circuit's node table. `0` is ground.
pub type NodeId = usize;

pub const GROUND: NodeId = 0;

/// Gating signal for the state update of every memristor.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum StrobeSchedule {
    #[default]
    High,
    Low,
    /// High on `[t_on, t_off)`.
    Window { t_on: f64, t_off: f64 },
    /// Step-held levels; before the first breakpoint the first level applies.
    Pwl(Vec<(f64, bool)>),
}

impl StrobeSchedule {
    pub fn level_at(&self, t: f64) -> bool {
        match self {
            StrobeSchedule::High => true,
            StrobeSchedule::Low => false,
            StrobeSchedule::Window { t_on, t_off } => t >= *t_on && t < *t_off,
            StrobeSchedule::Pwl(points) => {
                let idx = points.partition_point(|&(tp, _)| tp <= t);
                points[idx.saturating_sub(1)].1
            }
        }
    }

    fn validate(&self) -> Result<(), String> {
        match self {
            StrobeSchedule::High | StrobeSchedule::Low => Ok(()),
            StrobeSchedule::Window { t_on, t_off } => {
                if t_on.is_finite() && t_off.is_finite() && t_on < t_off {
                    Ok(())
                } else {
                    Err(format!("strobe window needs t_on < t_off, got {t_on} and {t_off}"))
                }
            }
            StrobeSchedule::Pwl(points) => {
                if points.is_empty() {
                    return Err("strobe pwl needs at least one breakpoint".into());
                }
                if points.windows(2).any(|w| !(w[1].0 > w[0].0)) || points.iter().any(|p| !p.0.is_finite()) {
                    return Err("strobe pwl times must be finite and strictly increasing".into());
                }
                Ok(())
            }
        }
    }
}

/// Transient analysis directive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tran {
    pub dt: f64,
    pub tstop: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DeviceKind {
    Memristor { a: NodeId, b: NodeId, model: String, vg0: f64 },
    Switch { a: NodeId, b: NodeId, params: SwitchParams },
    Resistor { a: NodeId, b: NodeId, ohms: f64 },
    VSource { pos: NodeId, neg: NodeId, spec: SourceSpec },
}

impl DeviceKind {
    fn card_letter(&self) -> char {
        match self {
            DeviceKind::Memristor { .. } => 'X',
            DeviceKind::Switch { .. } => 'S',
            DeviceKind::Resistor { .. } => 'R',
            DeviceKind::VSource { .. } => 'V',
        }
    }

    pub fn terminals(&self) -> (NodeId, NodeId) {
        match *self {
            DeviceKind::Memristor { a, b, .. }
            | DeviceKind::Switch { a, b, .. }
            | DeviceKind::Resistor { a, b, .. } => (a, b),
            DeviceKind::VSource { pos, neg, .. } => (pos, neg),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Device {
    pub id: String,
    pub kind: DeviceKind,
}

/// A parsed and validated netlist.
#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    nodes: Vec<String>,
    models: BTreeMap<String, MemristorParams>,
    devices: Vec<Device>,
    pub tran: Tran,
    pub strobe: StrobeSchedule,
}

impl Circuit {
    pub fn new(tran: Tran) -> Self {
        Circuit {
            nodes: alloc::vec![String::from("0")],
            models: BTreeMap::new(),
            devices: Vec::new(),
            tran,
            strobe: StrobeSchedule::High,
        }
    }

    /// Returns the id of `name`, creating the node if needed.
    pub fn node(&mut self, name: &str) -> NodeId {
        match self.node_id(name) {
            Some(id) => id,
            None => {
                self.nodes.push(name.to_string());
                self.nodes.len() - 1
            }
        }
    }

    pub fn node_id(&self, name: &str) -> Option<NodeId> {
        self.nodes.iter().position(|n| n == name)
    }

    pub fn node_name(&self, id: NodeId) -> &str {
        &self.nodes[id]
    }

    /// All node names, ground first.
    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    /// Model lookup; names are case-insensitive.
    pub fn model(&self, name: &str) -> Option<&MemristorParams> {
        self.models.get(&name.to_ascii_lowercase())
    }

    pub fn models(&self) -> impl Iterator<Item = (&str, &MemristorParams)> {
        self.models.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn set_model(&mut self, name: &str, params: MemristorParams) {
        self.models.insert(name.to_ascii_lowercase(), params);
    }

    pub fn devices(&self) -> &[Device] {
        &self.devices
    }

    pub fn device(&self, id: &str) -> Option<&Device> {
        self.devices.iter().find(|d| d.id.eq_ignore_ascii_case(id))
    }

    pub fn device_mut(&mut self, id: &str) -> Option<&mut Device> {
        self.devices.iter_mut().find(|d| d.id.eq_ignore_ascii_case(id))
    }

    /// Appends a device. The id must start with the card letter of its kind
    /// and be unique (case-insensitively).
    pub fn add_device(&mut self, id: &str, kind: DeviceKind) -> Result<(), String> {
        let letter = kind.card_letter();
        if !id.chars().next().is_some_and(|c| c.eq_ignore_ascii_case(&letter)) {
            return Err(format!("device id {id} must start with {letter}"));
        }
        if self.device(id).is_some() {
            return Err(format!("duplicate device id {id}"));
        }
        let (p, n) = kind.terminals();
        if p >= self.nodes.len() || n >= self.nodes.len() {
            return Err(format!("device {id} references an undeclared node"));
        }
        self.devices.push(Device { id: id.to_string(), kind });
        Ok(())
    }

    pub fn memristor_count(&self) -> usize {
        self.devices.iter().filter(|d| matches!(d.kind, DeviceKind::Memristor { .. })).count()
    }

    /// Checks the invariants a parsed circuit guarantees.
    pub fn validate(&self) -> Result<(), String> {
        if !(self.tran.dt > 0.0 && self.tran.dt.is_finite() && self.tran.tstop.is_finite() && self.tran.dt <= self.tran.tstop) {
            return Err(format!(
                ".tran needs 0 < dt <= tstop, got dt={} tstop={}",
                self.tran.dt, self.tran.tstop
            ));
        }
        self.strobe.validate()?;
        for (name, p) in &self.models {
            p.validate().map_err(|e| format!("model {name}: {e}"))?;
        }
        for d in &self.devices {
            let (p, n) = d.kind.terminals();
            if p >= self.nodes.len() || n >= self.nodes.len() {
                return Err(format!("device {} references an undeclared node", d.id));
            }
            match &d.kind {
                DeviceKind::Memristor { model, vg0, .. } => {
                    let params = self.model(model).ok_or_else(|| format!("unresolved model {model}"))?;
                    if !(*vg0 >= 0.0 && *vg0 <= params.vdd) {
                        return Err(format!("device {}: vg0 = {vg0} outside [0, vdd]", d.id));
                    }
                }
                DeviceKind::Switch { params, .. } => params.validate().map_err(|e| format!("device {}: {e}", d.id))?,
                DeviceKind::Resistor { ohms, .. } => {
                    if !(ohms.is_finite() && *ohms > 0.0) {
                        return Err(format!("device {}: resistance must be > 0", d.id));
                    }
                }
                DeviceKind::VSource { spec, .. } => spec.validate().map_err(|e| format!("device {}: {e}", d.id))?,
            }
        }
        Ok(())
    }
}

/// Error from [`parse_value`]; `column` is the 0-based offset in the token.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValueError {
    pub token: String,
    pub column: usize,
}

impl fmt::Display for ValueError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "malformed number '{}'", self.token)
    }
}

impl core::error::Error for ValueError {}

/// Parses a number with an optional SPICE magnitude suffix
/// (`f p n u m k meg g`, case-insensitive). Unit letters after the suffix
/// are ignored, so `100fF` is `1e-13`.
pub fn parse_value(token: &str) -> Result<f64, ValueError> {
    let bytes = token.as_bytes();
    let err = |column: usize| ValueError { token: token.to_string(), column };
    let mut i = 0;
    if i < bytes.len() && (bytes[i] == b'+' || bytes[i] == b'-') {
        i += 1;
    }
    let int_start = i;
    while i < bytes.len() && bytes[i].is_ascii_digit() {
        i += 1;
    }
    let mut digits = i - int_start;
    if i < bytes.len() && bytes[i] == b'.' {
        i += 1;
        let frac_start = i;
        while i < bytes.len() && bytes[i].is_ascii_digit() {
            i += 1;
        }
        digits += i - frac_start;
    }
    if digits == 0 {
        return Err(err(int_start));
    }
    if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
        let mut j = i + 1;
        if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
            j += 1;
        }
        let exp_start = j;
        while j < bytes.len() && bytes[j].is_ascii_digit() {
            j += 1;
        }
        if j > exp_start {
            i = j;
        }
    }
    let mantissa: f64 = token[..i].parse().map_err(|_| err(0))?;
    let rest = token[i..].to_ascii_lowercase();
    let (scale, unit) = if rest.starts_with("meg") {
        (1e6, &rest[3..])
    } else {
        match rest.chars().next() {
            Some('f') => (1e-15, &rest[1..]),
            Some('p') => (1e-12, &rest[1..]),
            Some('n') => (1e-9, &rest[1..]),
            Some('u') => (1e-6, &rest[1..]),
            Some('m') => (1e-3, &rest[1..]),
            Some('k') => (1e3, &rest[1..]),
            Some('g') => (1e9, &rest[1..]),
            _ => (1.0, rest.as_str()),
        }
    };
    if let Some(pos) = unit.find(|c: char| !c.is_ascii_alphabetic()) {
        return Err(err(token.len() - unit.len() + pos));
    }
    let value = mantissa * scale;
    if !value.is_finite() {
        return Err(err(0));
    }
    Ok(value)
}

#[derive(Debug, Clone, PartialEq)]
pub enum NetlistErrorKind {
    MalformedNumber(String),
    UnknownCard(String),
    UnknownDirective(String),
    BadArity { card: String, expected: &'static str },
    UnknownKeyword { card: String, keyword: String },
    DuplicateId(String),
    DuplicateModel(String),
    UnresolvedModel(String),
    MissingTran,
    DuplicateTran,
    Invalid(String),
}

/// A netlist error with its 1-based source position.
#[derive(Debug, Clone, PartialEq)]
pub struct NetlistError {
    pub line: Option<usize>,
    pub column: Option<usize>,
    pub kind: NetlistErrorKind,
}

impl fmt::Display for NetlistError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            NetlistErrorKind::MalformedNumber(tok) => write!(f, "malformed number '{tok}'")?,
            NetlistErrorKind::UnknownCard(tok) => write!(f, "unknown card '{tok}'")?,
            NetlistErrorKind::UnknownDirective(tok) => write!(f, "unknown directive '{tok}'")?,
            NetlistErrorKind::BadArity { card, expected } => write!(f, "bad arity for {card}: expected {expected}")?,
            NetlistErrorKind::UnknownKeyword { card, keyword } => write!(f, "unknown keyword '{keyword}' in {card}")?,
            NetlistErrorKind::DuplicateId(id) => write!(f, "duplicate device id {id}")?,
            NetlistErrorKind::DuplicateModel(name) => write!(f, "duplicate model {name}")?,
            NetlistErrorKind::UnresolvedModel(name) => write!(f, "unresolved model {name}")?,
            NetlistErrorKind::MissingTran => write!(f, "missing .tran directive")?,
            NetlistErrorKind::DuplicateTran => write!(f, "duplicate .tran directive")?,
            NetlistErrorKind::Invalid(msg) => write!(f, "{msg}")?,
        }
        if let Some(line) = self.line {
            write!(f, " at line {line}")?;
            if let Some(col) = self.column {
                write!(f, ", column {col}")?;
            }
        }
        Ok(())
    }
}

impl core::error::Error for NetlistError {}

#[derive(Debug, Clone, Copy)]
struct Token<'a> {
    text: &'a str,
    /// 1-based column.
    column: usize,
}

fn tokenize(line: &str) -> Vec<Token<'_>> {
    let mut tokens = Vec::new();
    let mut start: Option<usize> = None;
    for (i, c) in line.char_indices() {
        let sep = c.is_whitespace() || c == '(' || c == ')' || c == ',';
        match (sep, start) {
            (true, Some(s)) => {
                tokens.push(Token { text: &line[s..i], column: s + 1 });
                start = None;
            }
            (false, None) => start = Some(i),
            _ => {}
        }
    }
    if let Some(s) = start {
        tokens.push(Token { text: &line[s..], column: s + 1 });
    }
    tokens
}

struct LineCtx {
    line: usize,
}

impl LineCtx {
    fn error(&self, column: Option<usize>, kind: NetlistErrorKind) -> NetlistError {
        NetlistError { line: Some(self.line), column, kind }
    }

    fn value(&self, tok: Token<'_>) -> Result<f64, NetlistError> {
        parse_value(tok.text).map_err(|e| {
            self.error(Some(tok.column + e.column), NetlistErrorKind::MalformedNumber(tok.text.to_string()))
        })
    }

    fn invalid(&self, column: usize, msg: String) -> NetlistError {
        self.error(Some(column), NetlistErrorKind::Invalid(msg))
    }

    fn arity(&self, card: &str, expected: &'static str) -> NetlistError {
        self.error(None, NetlistErrorKind::BadArity { card: card.to_string(), expected })
    }
}

/// Splits a `key=value` token. Keys are lowercased.
fn split_assignment<'a>(tok: Token<'a>) -> Option<(String, Token<'a>)> {
    let eq = tok.text.find('=')?;
    let key = tok.text[..eq].to_ascii_lowercase();
    Some((key, Token { text: &tok.text[eq + 1..], column: tok.column + eq + 1 }))
}

fn parse_model(ctx: &LineCtx, tokens: &[Token<'_>]) -> Result<(String, MemristorParams), NetlistError> {
    if tokens.len() < 3 {
        return Err(ctx.arity(".model", "<name> memristor [key=value ...]"));
    }
    if !tokens[2].text.eq_ignore_ascii_case("memristor") {
        return Err(ctx.error(
            Some(tokens[2].column),
            NetlistErrorKind::UnknownKeyword { card: ".model".into(), keyword: tokens[2].text.to_string() },
        ));
    }
    let mut p = MemristorParams::default();
    for &tok in &tokens[3..] {
        let (key, val) = split_assignment(tok).ok_or_else(|| ctx.arity(".model", "key=value parameters"))?;
        match key.as_str() {
            "level" => {
                let level = ctx.value(val)?;
                p.level = match level {
                    l if l == 0.0 => DeviceLevel::Linear,
                    l if l == 1.0 => DeviceLevel::SquareLaw,
                    _ => return Err(ctx.invalid(val.column, format!("level must be 0 or 1, got {}", val.text))),
                };
            }
            "tauleak" if val.text.eq_ignore_ascii_case("inf") => p.tau_leak = f64::INFINITY,
            _ => {
                let slot = match key.as_str() {
                    "kp" => &mut p.kp,
                    "wl" => &mut p.w_over_l,
                    "vthn" => &mut p.vthn,
                    "vcm" => &mut p.vcm,
                    "vdd" => &mut p.vdd,
                    "cm" => &mut p.cm,
                    "ibias" => &mut p.ibias,
                    "gm0" => &mut p.gm0,
                    "gleak" => &mut p.g_leak,
                    "tauleak" => &mut p.tau_leak,
                    _ => {
                        return Err(ctx.error(
                            Some(tok.column),
                            NetlistErrorKind::UnknownKeyword { card: ".model".into(), keyword: key },
                        ))
                    }
                };
                *slot = ctx.value(val)?;
            }
        }
    }
    p.validate().map_err(|e: ParamError| ctx.invalid(tokens[1].column, format!("model {}: {e}", tokens[1].text)))?;
    Ok((tokens[1].text.to_ascii_lowercase(), p))
}

fn parse_source(ctx: &LineCtx, card: &str, tokens: &[Token<'_>]) -> Result<SourceSpec, NetlistError> {
    const EXPECTED: &str = "dc <v> | sin(<off> <amp> <freq> [phase]) | pulse(7 values) | pwl(<t> <v> ...)";
    let Some(&head) = tokens.first() else {
        return Err(ctx.arity(card, EXPECTED));
    };
    let kw = head.text.to_ascii_lowercase();
    let args = &tokens[1..];
    let values = |args: &[Token<'_>]| args.iter().map(|&t| ctx.value(t)).collect::<Result<Vec<f64>, _>>();
    let spec = match kw.as_str() {
        "dc" => {
            if args.len() != 1 {
                return Err(ctx.arity(card, "dc <v>"));
            }
            SourceSpec::Dc(ctx.value(args[0])?)
        }
        "sin" => {
            let v = values(args)?;
            if v.len() != 3 && v.len() != 4 {
                return Err(ctx.arity(card, "sin(<off> <amp> <freq> [phase])"));
            }
            SourceSpec::Sin { offset: v[0], amplitude: v[1], freq: v[2], phase: v.get(3).copied().unwrap_or(0.0) }
        }
        "pulse" => {
            let v = values(args)?;
            if v.len() != 7 {
                return Err(ctx.arity(card, "pulse(<v0> <v1> <delay> <rise> <fall> <width> <period>)"));
            }
            SourceSpec::Pulse { v0: v[0], v1: v[1], delay: v[2], rise: v[3], fall: v[4], width: v[5], period: v[6] }
        }
        "pwl" => {
            let v = values(args)?;
            if v.is_empty() || v.len() % 2 != 0 {
                return Err(ctx.arity(card, "pwl(<t1> <v1> ...)"));
            }
            SourceSpec::Pwl(v.chunks(2).map(|c| (c[0], c[1])).collect())
        }
        _ if args.is_empty() && parse_value(head.text).is_ok() => SourceSpec::Dc(ctx.value(head)?),
        _ => {
            return Err(ctx.error(
                Some(head.column),
                NetlistErrorKind::UnknownKeyword { card: card.to_string(), keyword: head.text.to_string() },
            ))
        }
    };
    spec.validate().map_err(|e| ctx.invalid(head.column, format!("{card}: {e}")))?;
    Ok(spec)
}

fn parse_strobe(ctx: &LineCtx, tokens: &[Token<'_>]) -> Result<StrobeSchedule, NetlistError> {
    let Some(&mode) = tokens.get(1) else {
        return Err(ctx.arity(".strobe", "high | low | window <t_on> <t_off> | pwl <t> <level> ..."));
    };
    let args = &tokens[2..];
    let schedule = match mode.text.to_ascii_lowercase().as_str() {
        "high" if args.is_empty() => StrobeSchedule::High,
        "low" if args.is_empty() => StrobeSchedule::Low,
        "window" if args.len() == 2 => StrobeSchedule::Window { t_on: ctx.value(args[0])?, t_off: ctx.value(args[1])? },
        "pwl" if !args.is_empty() && args.len().is_multiple_of(2) => {
            let mut points = Vec::with_capacity(args.len() / 2);
            for pair in args.chunks(2) {
                let t = ctx.value(pair[0])?;
                let level = ctx.value(pair[1])?;
                let level = match level {
                    l if l == 0.0 => false,
                    l if l == 1.0 => true,
                    _ => return Err(ctx.invalid(pair[1].column, format!("strobe level must be 0 or 1, got {}", pair[1].text))),
                };
                points.push((t, level));
            }
            StrobeSchedule::Pwl(points)
        }
        "high" | "low" | "window" | "pwl" => {
            return Err(ctx.arity(".strobe", "high | low | window <t_on> <t_off> | pwl <t> <level> ..."))
        }
        _ => {
            return Err(ctx.error(
                Some(mode.column),
                NetlistErrorKind::UnknownKeyword { card: ".strobe".into(), keyword: mode.text.to_string() },
            ))
        }
    };
    schedule.validate().map_err(|msg| ctx.invalid(mode.column, msg))?;
    Ok(schedule)
}

/// Parses netlist text into a validated [`Circuit`]. The first error aborts.
pub fn parse_netlist(text: &str) -> Result<Circuit, NetlistError> {
    let mut circuit = Circuit::new(Tran { dt: 0.0, tstop: 0.0 });
    let mut tran_seen = false;
    let mut strobe_line: Option<usize> = None;
    // Model references are resolved after the whole file is read.
    let mut model_refs: Vec<(usize, String)> = Vec::new();
    // Whole-file errors point at the line where reading stopped.
    let mut last_line = 1;

    for (idx, raw) in text.lines().enumerate() {
        let ctx = LineCtx { line: idx + 1 };
        last_line = idx + 1;
        let tokens = tokenize(raw);
        let Some(&first) = tokens.first() else { continue };
        if first.text.starts_with('*') {
            continue;
        }
        let card = first.text;
        let lower = card.to_ascii_lowercase();

        if lower.starts_with('.') {
            match lower.as_str() {
                ".end" => break,
                ".tran" => {
                    if tran_seen {
                        return Err(ctx.error(None, NetlistErrorKind::DuplicateTran));
                    }
                    if tokens.len() != 3 {
                        return Err(ctx.arity(".tran", "<dt> <tstop>"));
                    }
                    let tran = Tran { dt: ctx.value(tokens[1])?, tstop: ctx.value(tokens[2])? };
                    if !(tran.dt > 0.0 && tran.dt <= tran.tstop) {
                        return Err(ctx.invalid(first.column, ".tran needs 0 < dt <= tstop".into()));
                    }
                    circuit.tran = tran;
                    tran_seen = true;
                }
                ".model" => {
                    let (name, params) = parse_model(&ctx, &tokens)?;
                    if circuit.models.contains_key(&name) {
                        return Err(ctx.error(Some(tokens[1].column), NetlistErrorKind::DuplicateModel(name)));
                    }
                    circuit.models.insert(name, params);
                }
                ".strobe" => {
                    if strobe_line.is_some() {
                        return Err(ctx.invalid(first.column, "duplicate .strobe directive".into()));
                    }
                    circuit.strobe = parse_strobe(&ctx, &tokens)?;
                    strobe_line = Some(ctx.line);
                }
                _ => return Err(ctx.error(Some(first.column), NetlistErrorKind::UnknownDirective(card.to_string()))),
            }
            continue;
        }

        let letter = lower.chars().next().unwrap_or(' ');
        if !matches!(letter, 'v' | 'r' | 's' | 'x') {
            return Err(ctx.error(Some(first.column), NetlistErrorKind::UnknownCard(card.to_string())));
        }
        if tokens.len() < 4 {
            let expected = match letter {
                'v' => "<n+> <n-> <source>",
                'r' => "<a> <b> <ohms>",
                's' => "<a> <b> on|off [ron=] [goff=]",
                _ => "<a> <b> <model> [vg0=]",
            };
            return Err(ctx.arity(card, expected));
        }
        if circuit.device(card).is_some() {
            return Err(ctx.error(Some(first.column), NetlistErrorKind::DuplicateId(card.to_string())));
        }
        let a = circuit.node(tokens[1].text);
        let b = circuit.node(tokens[2].text);
        let kind = match letter {
            'v' => DeviceKind::VSource { pos: a, neg: b, spec: parse_source(&ctx, card, &tokens[3..])? },
            'r' => {
                if tokens.len() != 4 {
                    return Err(ctx.arity(card, "<a> <b> <ohms>"));
                }
                let ohms = ctx.value(tokens[3])?;
                if ohms <= 0.0 {
                    return Err(ctx.invalid(tokens[3].column, format!("{card}: resistance must be > 0")));
                }
                DeviceKind::Resistor { a, b, ohms }
            }
            's' => {
                let position = match tokens[3].text.to_ascii_lowercase().as_str() {
                    "on" => SwitchPosition::On,
                    "off" => SwitchPosition::Off,
                    _ => {
                        return Err(ctx.error(
                            Some(tokens[3].column),
                            NetlistErrorKind::UnknownKeyword { card: card.to_string(), keyword: tokens[3].text.to_string() },
                        ))
                    }
                };
                let mut params = SwitchParams::new(position);
                for &tok in &tokens[4..] {
                    let (key, val) = split_assignment(tok).ok_or_else(|| ctx.arity(card, "<a> <b> on|off [ron=] [goff=]"))?;
                    match key.as_str() {
                        "ron" => params.r_on = ctx.value(val)?,
                        "goff" => params.g_off = ctx.value(val)?,
                        _ => {
                            return Err(ctx.error(
                                Some(tok.column),
                                NetlistErrorKind::UnknownKeyword { card: card.to_string(), keyword: key },
                            ))
                        }
                    }
                }
                params.validate().map_err(|e| ctx.invalid(first.column, format!("{card}: {e}")))?;
                DeviceKind::Switch { a, b, params }
            }
            _ => {
                let model = tokens[3].text.to_ascii_lowercase();
                let mut vg0 = 0.0;
                for &tok in &tokens[4..] {
                    let (key, val) = split_assignment(tok).ok_or_else(|| ctx.arity(card, "<a> <b> <model> [vg0=]"))?;
                    if key != "vg0" {
                        return Err(ctx.error(
                            Some(tok.column),
                            NetlistErrorKind::UnknownKeyword { card: card.to_string(), keyword: key },
                        ));
                    }
                    vg0 = ctx.value(val)?;
                }
                if vg0 < 0.0 {
                    return Err(ctx.invalid(first.column, format!("{card}: vg0 must be >= 0")));
                }
                model_refs.push((ctx.line, model.clone()));
                DeviceKind::Memristor { a, b, model, vg0 }
            }
        };
        circuit.devices.push(Device { id: card.to_string(), kind });
    }

    for (line, model) in &model_refs {
        if !circuit.models.contains_key(model) {
            return Err(NetlistError { line: Some(*line), column: None, kind: NetlistErrorKind::UnresolvedModel(model.clone()) });
        }
    }
    if !tran_seen {
        return Err(NetlistError { line: Some(last_line), column: None, kind: NetlistErrorKind::MissingTran });
    }
    circuit
        .validate()
        .map_err(|msg| NetlistError { line: Some(last_line), column: None, kind: NetlistErrorKind::Invalid(msg) })?;
    Ok(circuit)
}

/// Formats a float so that [`parse_value`] reads back the identical value.
pub fn format_value(v: f64) -> String {
    if v.is_infinite() {
        return String::from("inf");
    }
    format!("{v:e}")
}

/// Canonical text form of a circuit. Parsing the result yields an equal
/// circuit.
pub fn serialize_netlist(c: &Circuit) -> String {
    let mut out = String::new();
    let v = format_value;
    for (name, p) in &c.models {
        let _ = writeln!(
            out,
            ".model {name} memristor kp={} wl={} vthn={} vcm={} vdd={} cm={} ibias={} gm0={} gleak={} tauleak={} level={}",
            v(p.kp),
            v(p.w_over_l),
            v(p.vthn),
            v(p.vcm),
            v(p.vdd),
            v(p.cm),
            v(p.ibias),
            v(p.gm0),
            v(p.g_leak),
            v(p.tau_leak),
            p.level.index(),
        );
    }
    for d in &c.devices {
        let (a, b) = d.kind.terminals();
        let _ = write!(out, "{} {} {}", d.id, c.node_name(a), c.node_name(b));
        match &d.kind {
            DeviceKind::Memristor { model, vg0, .. } => {
                let _ = write!(out, " {model}");
                if *vg0 != 0.0 {
                    let _ = write!(out, " vg0={}", v(*vg0));
                }
            }
            DeviceKind::Switch { params, .. } => {
                let pos = if params.is_on() { "on" } else { "off" };
                let _ = write!(out, " {pos} ron={} goff={}", v(params.r_on), v(params.g_off));
            }
            DeviceKind::Resistor { ohms, .. } => {
                let _ = write!(out, " {}", v(*ohms));
            }
            DeviceKind::VSource { spec, .. } => match spec {
                SourceSpec::Dc(x) => {
                    let _ = write!(out, " dc {}", v(*x));
                }
                SourceSpec::Sin { offset, amplitude, freq, phase } => {
                    let _ = write!(out, " sin({} {} {} {})", v(*offset), v(*amplitude), v(*freq), v(*phase));
                }
                SourceSpec::Pulse { v0, v1, delay, rise, fall, width, period } => {
                    let _ = write!(
                        out,
                        " pulse({} {} {} {} {} {} {})",
                        v(*v0),
                        v(*v1),
                        v(*delay),
                        v(*rise),
                        v(*fall),
                        v(*width),
                        v(*period)
                    );
                }
                SourceSpec::Pwl(points) => {
                    out.push_str(" pwl(");
                    for (i, (t, x)) in points.iter().enumerate() {
                        if i > 0 {
                            out.push(' ');
                        }
                        let _ = write!(out, "{} {}", v(*t), v(*x));
                    }
                    out.push(')');
                }
            },
        }
        out.push('\n');
    }
    let _ = writeln!(out, ".tran {} {}", v(c.tran.dt), v(c.tran.tstop));
    match &c.strobe {
        StrobeSchedule::High => out.push_str(".strobe high\n"),
        StrobeSchedule::Low => out.push_str(".strobe low\n"),
        StrobeSchedule::Window { t_on, t_off } => {
            let _ = writeln!(out, ".strobe window {} {}", v(*t_on), v(*t_off));
        }
        StrobeSchedule::Pwl(points) => {
            out.push_str(".strobe pwl");
            for (t, level) in points {
                let _ = write!(out, " {} {}", v(*t), u8::from(*level));
            }
            out.push('\n');
        }
    }
    out.push_str(".end\n");
    out
}
