use thiserror::Error;

use super::{BarrierKind, Config, EventKind, Location, Scope, ThreadId, Trace, MAX_WARP_SIZE};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: lane {lane} out of range for warp size {lanes}")]
    LaneOutOfRange { line: usize, lane: u32, lanes: u32 },
    #[error("line {line}: thread {tid} outside the launch configuration")]
    ThreadOutOfRange { line: usize, tid: ThreadId },
    #[error("line {line}: shared location of block {owner} used by thread {tid}")]
    ForeignShared { line: usize, owner: u32, tid: ThreadId },
    #[error("missing `config` line")]
    MissingConfig,
}

fn syntax(line: usize, msg: impl Into<String>) -> ParseError {
    ParseError::Syntax { line, msg: msg.into() }
}

/// Parses the textual trace format. Warp-coalesced `wacc` records are
/// expanded into one access per active lane, lane 0 first.
pub fn parse_trace(text: &str) -> Result<Trace, ParseError> {
    let mut trace: Option<Trace> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let toks: Vec<&str> = body.split_whitespace().collect();
        let Some(tr) = trace.as_mut() else {
            trace = Some(Trace::new(parse_config(line, &toks)?));
            continue;
        };
        let cfg = tr.config;
        let mut p = LineParser { line, cfg, toks: &toks, pos: 0 };
        p.parse_into(&mut tr.events)?;
    }
    trace.ok_or(ParseError::MissingConfig)
}

fn parse_config(line: usize, toks: &[&str]) -> Result<Config, ParseError> {
    if toks.first() != Some(&"config") {
        return Err(syntax(line, "first line must be `config blocks=<n> warps=<n> lanes=<n>`"));
    }
    let (mut blocks, mut warps, mut lanes) = (None, None, None);
    for tok in &toks[1..] {
        let (key, val) = tok
            .split_once('=')
            .ok_or_else(|| syntax(line, format!("expected key=value, found `{tok}`")))?;
        let n: u32 = val
            .parse()
            .map_err(|_| syntax(line, format!("bad number `{val}`")))?;
        match key {
            "blocks" => blocks = Some(n),
            "warps" => warps = Some(n),
            "lanes" => lanes = Some(n),
            _ => return Err(syntax(line, format!("unknown config key `{key}`"))),
        }
    }
    let cfg = Config::new(
        blocks.ok_or_else(|| syntax(line, "missing blocks="))?,
        warps.ok_or_else(|| syntax(line, "missing warps="))?,
        lanes.unwrap_or(super::DEFAULT_WARP_SIZE),
    );
    if cfg.blocks == 0 || cfg.warps == 0 || cfg.lanes == 0 || cfg.lanes > MAX_WARP_SIZE {
        return Err(syntax(line, format!("unsupported configuration {cfg:?}")));
    }
    Ok(cfg)
}

pub(crate) fn parse_hex(s: &str) -> Option<u64> {
    let digits = s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")).unwrap_or(s);
    u64::from_str_radix(digits, 16).ok()
}

fn parse_mask(s: &str) -> Option<u64> {
    match s.strip_prefix("0b") {
        Some(bits) => u64::from_str_radix(bits, 2).ok(),
        None => parse_hex(s),
    }
}

struct LineParser<'a> {
    line: usize,
    cfg: Config,
    toks: &'a [&'a str],
    pos: usize,
}

impl<'a> LineParser<'a> {
    fn next(&mut self, what: &str) -> Result<&'a str, ParseError> {
        let tok = self
            .toks
            .get(self.pos)
            .copied()
            .ok_or_else(|| syntax(self.line, format!("expected {what}")))?;
        self.pos += 1;
        Ok(tok)
    }

    fn peek(&self) -> Option<&'a str> {
        self.toks.get(self.pos).copied()
    }

    fn finish(&self) -> Result<(), ParseError> {
        match self.peek() {
            None => Ok(()),
            Some(tok) => Err(syntax(self.line, format!("unexpected `{tok}`"))),
        }
    }

    fn number(&mut self, what: &str) -> Result<u32, ParseError> {
        let tok = self.next(what)?;
        tok.parse()
            .map_err(|_| syntax(self.line, format!("bad {what} `{tok}`")))
    }

    fn hex(&mut self, what: &str) -> Result<u64, ParseError> {
        let tok = self.next(what)?;
        parse_hex(tok).ok_or_else(|| syntax(self.line, format!("bad {what} `{tok}`")))
    }

    fn mask(&mut self) -> Result<u64, ParseError> {
        let tok = self.next("mask")?;
        let m = parse_mask(tok).ok_or_else(|| syntax(self.line, format!("bad mask `{tok}`")))?;
        if m & !self.cfg.full_mask() != 0 {
            return Err(ParseError::LaneOutOfRange {
                line: self.line,
                lane: 63 - m.leading_zeros(),
                lanes: self.cfg.lanes,
            });
        }
        Ok(m)
    }

    fn scope(&mut self, block: u32) -> Result<Scope, ParseError> {
        match self.next("scope")? {
            "block" => Ok(Scope::Block(block)),
            "device" | "system" => Ok(Scope::Device),
            other => Err(syntax(self.line, format!("bad scope `{other}`"))),
        }
    }

    fn check_thread(&self, tid: ThreadId) -> Result<ThreadId, ParseError> {
        if tid.lane >= self.cfg.lanes {
            return Err(ParseError::LaneOutOfRange { line: self.line, lane: tid.lane, lanes: self.cfg.lanes });
        }
        if !self.cfg.contains(tid) {
            return Err(ParseError::ThreadOutOfRange { line: self.line, tid });
        }
        Ok(tid)
    }

    fn check_warp(&self, block: u32, warp: u32) -> Result<(), ParseError> {
        self.check_thread(ThreadId::new(block, warp, 0)).map(|_| ())
    }

    fn location(&self, tok: &str, tid: ThreadId) -> Result<Location, ParseError> {
        let (space, addr) = tok
            .split_once(':')
            .ok_or_else(|| syntax(self.line, format!("bad location `{tok}`")))?;
        let addr = parse_hex(addr).ok_or_else(|| syntax(self.line, format!("bad address `{addr}`")))?;
        if space == "g" {
            return Ok(Location::Global(addr));
        }
        let owner = match space.strip_prefix('s') {
            Some("") => tid.block,
            Some(b) => b
                .parse()
                .map_err(|_| syntax(self.line, format!("bad location `{tok}`")))?,
            None => return Err(syntax(self.line, format!("bad memory space in `{tok}`"))),
        };
        if owner != tid.block {
            return Err(ParseError::ForeignShared { line: self.line, owner, tid });
        }
        Ok(Location::Shared { block: owner, addr })
    }

    /// Optional `atomic <scope>` and `instr <n>` suffixes.
    fn access_suffix(&mut self, block: u32) -> Result<(Option<Scope>, Option<u64>), ParseError> {
        let (mut atomic, mut instr) = (None, None);
        while let Some(tok) = self.peek() {
            self.pos += 1;
            match tok {
                "atomic" if atomic.is_none() => atomic = Some(self.scope(block)?),
                "instr" if instr.is_none() => {
                    let t = self.next("instruction id")?;
                    instr = Some(
                        t.parse()
                            .map_err(|_| syntax(self.line, format!("bad instruction id `{t}`")))?,
                    );
                }
                other => return Err(syntax(self.line, format!("unexpected `{other}`"))),
            }
        }
        Ok((atomic, instr))
    }

    fn access_kind(&mut self) -> Result<bool, ParseError> {
        match self.next("rd|wr")? {
            "rd" => Ok(false),
            "wr" => Ok(true),
            other => Err(syntax(self.line, format!("expected rd|wr, found `{other}`"))),
        }
    }

    fn parse_into(&mut self, out: &mut Vec<EventKind>) -> Result<(), ParseError> {
        let head = self.next("event")?;
        match head {
            "bar" => {
                let kind = match self.next("block|warp")? {
                    "block" => {
                        let block = self.number("block index")?;
                        self.check_warp(block, 0)?;
                        let arrived = match self.peek() {
                            None => None,
                            Some(_) => {
                                let tok = self.next("arrival masks")?;
                                let masks = tok
                                    .split(',')
                                    .map(|m| parse_mask(m).filter(|m| m & !self.cfg.full_mask() == 0))
                                    .collect::<Option<Vec<_>>>()
                                    .ok_or_else(|| syntax(self.line, format!("bad arrival masks `{tok}`")))?;
                                if masks.len() != self.cfg.warps as usize {
                                    return Err(syntax(self.line, "need one arrival mask per warp"));
                                }
                                Some(masks)
                            }
                        };
                        BarrierKind::Block { block, arrived }
                    }
                    "warp" => {
                        let block = self.number("block index")?;
                        let warp = self.number("warp index")?;
                        self.check_warp(block, warp)?;
                        let mask = self.mask()?;
                        BarrierKind::Warp { block, warp, mask }
                    }
                    other => return Err(syntax(self.line, format!("bad barrier kind `{other}`"))),
                };
                self.finish()?;
                out.push(EventKind::Barrier(kind));
            }
            "wacc" => {
                let block = self.number("block index")?;
                let warp = self.number("warp index")?;
                self.check_warp(block, warp)?;
                let mask = self.mask()?;
                let write = self.access_kind()?;
                let mut addrs: Vec<&str> = self.next("addresses")?.split(',').filter(|a| !a.is_empty()).collect();
                while let Some(tok) = self.peek().filter(|t| !matches!(*t, "atomic" | "instr")) {
                    addrs.extend(tok.split(',').filter(|a| !a.is_empty()));
                    self.pos += 1;
                }
                let (atomic, instr) = self.access_suffix(block)?;
                let lanes: Vec<u32> = (0..self.cfg.lanes).filter(|l| mask >> l & 1 == 1).collect();
                if lanes.len() != addrs.len() {
                    return Err(syntax(
                        self.line,
                        format!("mask has {} active lanes but {} addresses", lanes.len(), addrs.len()),
                    ));
                }
                for (lane, a) in lanes.into_iter().zip(addrs) {
                    let tid = ThreadId::new(block, warp, lane);
                    let loc = self.location(a, tid)?;
                    out.push(EventKind::Access { tid, loc, write, atomic, instr });
                }
            }
            tid_tok => {
                let tid = self.thread_id(tid_tok)?;
                let ev = match self.next("operation")? {
                    op @ ("rd" | "wr") => {
                        let loc = self.location(self.peek().unwrap_or(""), tid)?;
                        self.pos += 1;
                        let (atomic, instr) = self.access_suffix(tid.block)?;
                        EventKind::Access { tid, loc, write: op == "wr", atomic, instr }
                    }
                    op @ ("acq" | "rel") => {
                        let lock = self.hex("lock id")?;
                        let scope = self.scope(tid.block)?;
                        if op == "acq" {
                            EventKind::Acquire { tid, lock, scope }
                        } else {
                            EventKind::Release { tid, lock, scope }
                        }
                    }
                    "fence" => EventKind::Fence { tid, scope: self.scope(tid.block)? },
                    "end" => EventKind::End { tid },
                    other => return Err(syntax(self.line, format!("unknown operation `{other}`"))),
                };
                self.finish()?;
                out.push(ev);
            }
        }
        Ok(())
    }

    fn thread_id(&self, tok: &str) -> Result<ThreadId, ParseError> {
        let parts: Vec<&str> = tok.split('.').collect();
        let nums: Option<Vec<u32>> = parts.iter().map(|p| p.parse().ok()).collect();
        match nums.as_deref() {
            Some(&[b, w, l]) => self.check_thread(ThreadId::new(b, w, l)),
            _ => Err(syntax(self.line, format!("expected <block>.<warp>.<lane>, found `{tok}`"))),
        }
    }
}
