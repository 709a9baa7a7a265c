//! Line-oriented atlas description files.
//!
//! ```text
//! kuranishi-atlas v1
//! atlas <name> dim <D>
//! space <n> [periodic <axes>]
//! chart <I> domain <region> [periodic <axes>] obs <m> section <exprs> footprint <exprs> [zeros <region>] [embed <exprs>]
//! change <I> -> <J> domain <region> map <exprs> [window <axis>:<cut> ...] linear <matrix>
//! reduction <name> <I> <region> ; <I> <region> ...
//! orientation <I> <+1|-1>
//! ```
//!
//! Regions are `empty`, `pt`, or boxes such as `(0,1)x[1/2,1)` joined by
//! `|`; points are written `{a}`. Axes are 1-based. Matrices are nested
//! lists `[[1,0],[0,1]]` or `zeros(r,c)` when a dimension is 0. Lines
//! starting with `#` are comments.

use super::{Atlas, ReductionSpec};
use crate::chart::{Chart, CoordChange, IndexSet};
use crate::expr::{Expr, ExprMap};
use crate::geometry::{BoxN, Interval, Region};
use crate::linalg::{RationalMatrix, Q};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use thiserror::Error;

pub const HEADER: &str = "kuranishi-atlas v1";

#[derive(Debug, Error, Clone, PartialEq)]
#[error("line {line}, column {col}: {msg}")]
pub struct FileError {
    pub line: usize,
    pub col: usize,
    pub msg: String,
}

struct Tok<'a> {
    text: &'a str,
    col: usize,
}

/// Whitespace-separated tokens, keeping bracketed groups together.
fn tokens(line: &str) -> Vec<Tok<'_>> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut start: Option<usize> = None;
    for (i, ch) in line.char_indices() {
        match ch {
            '[' | '(' | '{' => depth += 1,
            ']' | ')' | '}' => depth -= 1,
            _ => {}
        }
        if ch.is_whitespace() && depth <= 0 {
            if let Some(s) = start.take() {
                out.push(Tok { text: &line[s..i], col: s + 1 });
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push(Tok { text: &line[s..], col: s + 1 });
    }
    out
}

fn split_depth0(s: &str, sep: char) -> Vec<&str> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut last = 0;
    for (i, ch) in s.char_indices() {
        match ch {
            '[' | '(' | '{' => depth += 1,
            ']' | ')' | '}' => depth -= 1,
            c if c == sep && depth == 0 => {
                out.push(&s[last..i]);
                last = i + c.len_utf8();
            }
            _ => {}
        }
    }
    out.push(&s[last..]);
    out
}

struct LineCtx {
    line: usize,
}

impl LineCtx {
    fn err(&self, col: usize, msg: impl Into<String>) -> FileError {
        FileError { line: self.line, col, msg: msg.into() }
    }
}

/// Keyword fields of one line: keyword -> (joined value, column).
fn fields<'a>(ctx: &LineCtx, toks: &'a [Tok<'a>], keywords: &[&str]) -> Result<BTreeMap<String, (String, usize)>, FileError> {
    let mut out: BTreeMap<String, (String, usize)> = BTreeMap::new();
    let mut cur: Option<(String, usize, Vec<&str>)> = None;
    for t in toks {
        if keywords.contains(&t.text) && !(t.text == "window" && cur.as_ref().is_some_and(|c| c.0 == "window")) {
            if let Some((k, c, v)) = cur.take() {
                if out.contains_key(&k) {
                    return Err(ctx.err(c, format!("duplicate `{k}`")));
                }
                out.insert(k, (v.join(" "), c));
            }
            cur = Some((t.text.to_string(), t.col, vec![]));
        } else {
            match &mut cur {
                Some((_, _, v)) => v.push(t.text),
                None => return Err(ctx.err(t.col, format!("unexpected `{}`", t.text))),
            }
        }
    }
    if let Some((k, c, v)) = cur {
        if out.contains_key(&k) {
            return Err(ctx.err(c, format!("duplicate `{k}`")));
        }
        out.insert(k, (v.join(" "), c));
    }
    Ok(out)
}

fn parse_q(ctx: &LineCtx, col: usize, s: &str) -> Result<Q, FileError> {
    let s = s.trim();
    s.parse::<Q>().map_err(|_| ctx.err(col, format!("bad rational `{s}`")))
}

fn parse_interval(ctx: &LineCtx, col: usize, s: &str) -> Result<Interval, FileError> {
    let s = s.trim();
    if let Some(inner) = s.strip_prefix('{').and_then(|r| r.strip_suffix('}')) {
        return Ok(Interval::point(parse_q(ctx, col, inner)?));
    }
    let lo_closed = match s.chars().next() {
        Some('[') => true,
        Some('(') => false,
        _ => return Err(ctx.err(col, format!("bad interval `{s}`"))),
    };
    let hi_closed = match s.chars().last() {
        Some(']') => true,
        Some(')') => false,
        _ => return Err(ctx.err(col, format!("bad interval `{s}`"))),
    };
    let inner = &s[1..s.len() - 1];
    let parts: Vec<&str> = inner.split(',').collect();
    if parts.len() != 2 {
        return Err(ctx.err(col, format!("bad interval `{s}`")));
    }
    let lo = parse_q(ctx, col, parts[0])?;
    let hi = parse_q(ctx, col, parts[1])?;
    if lo > hi {
        return Err(ctx.err(col, format!("interval `{s}` has lo > hi")));
    }
    Ok(Interval { lo, hi, lo_closed, hi_closed })
}

pub fn parse_region_str(s: &str, periodic: &[bool]) -> Result<Region, FileError> {
    parse_region(&LineCtx { line: 0 }, 1, s, periodic)
}

fn parse_region(ctx: &LineCtx, col: usize, s: &str, periodic: &[bool]) -> Result<Region, FileError> {
    let dim = periodic.len();
    let s = s.trim();
    if s == "empty" {
        return Ok(Region::empty(dim, periodic.to_vec()));
    }
    let mut boxes: Vec<BoxN> = Vec::new();
    for b in split_depth0(s, '|') {
        let b = b.trim();
        if b == "pt" {
            if dim != 0 {
                return Err(ctx.err(col, "`pt` only describes R^0"));
            }
            boxes.push(vec![]);
            continue;
        }
        let ivs = split_depth0(b, 'x').into_iter().map(|iv| parse_interval(ctx, col, iv)).collect::<Result<Vec<_>, _>>()?;
        if ivs.len() != dim {
            return Err(ctx.err(col, format!("box `{b}` has {} factors, expected {dim}", ivs.len())));
        }
        boxes.push(ivs);
    }
    if dim == 0 {
        return Ok(if boxes.is_empty() { Region::empty(0, vec![]) } else { Region::point0() });
    }
    Ok(Region::new(dim, periodic.to_vec(), boxes))
}

fn parse_exprs(ctx: &LineCtx, col: usize, s: &str, in_dim: usize) -> Result<ExprMap, FileError> {
    let s = s.trim();
    let inner = s
        .strip_prefix('[')
        .and_then(|r| r.strip_suffix(']'))
        .ok_or_else(|| ctx.err(col, format!("expected `[...]`, found `{s}`")))?;
    let parts: Vec<&str> = if inner.trim().is_empty() { vec![] } else { split_depth0(inner, ',') };
    ExprMap::parse(in_dim, &parts).map_err(|e| ctx.err(col, format!("expression: {}", e.msg)))
}

fn parse_matrix(ctx: &LineCtx, col: usize, s: &str) -> Result<RationalMatrix, FileError> {
    let s = s.trim();
    if let Some(inner) = s.strip_prefix("zeros(").and_then(|r| r.strip_suffix(')')) {
        let p: Vec<&str> = inner.split(',').collect();
        if p.len() != 2 {
            return Err(ctx.err(col, "zeros(r,c) expects two sizes"));
        }
        let r: usize = p[0].trim().parse().map_err(|_| ctx.err(col, "bad row count"))?;
        let c: usize = p[1].trim().parse().map_err(|_| ctx.err(col, "bad column count"))?;
        return Ok(RationalMatrix::zeros(r, c));
    }
    let inner = s
        .strip_prefix('[')
        .and_then(|r| r.strip_suffix(']'))
        .ok_or_else(|| ctx.err(col, format!("bad matrix `{s}`")))?;
    let mut rows: Vec<Vec<Q>> = Vec::new();
    for r in split_depth0(inner, ',') {
        let r = r.trim();
        let ri = r.strip_prefix('[').and_then(|x| x.strip_suffix(']')).ok_or_else(|| ctx.err(col, format!("bad matrix row `{r}`")))?;
        rows.push(ri.split(',').map(|v| parse_q(ctx, col, v)).collect::<Result<_, _>>()?);
    }
    if rows.iter().any(|r| r.len() != rows[0].len()) {
        return Err(ctx.err(col, "ragged matrix"));
    }
    Ok(RationalMatrix::from_rows(&rows))
}

fn parse_axes(ctx: &LineCtx, col: usize, s: &str, dim: usize) -> Result<Vec<bool>, FileError> {
    let mut out = vec![false; dim];
    for p in s.split(',') {
        let k: usize = p.trim().parse().map_err(|_| ctx.err(col, format!("bad axis `{p}`")))?;
        if k == 0 || k > dim {
            return Err(ctx.err(col, format!("axis {k} out of range 1..{dim}")));
        }
        out[k - 1] = true;
    }
    Ok(out)
}

fn parse_index(ctx: &LineCtx, t: &Tok<'_>) -> Result<IndexSet, FileError> {
    t.text.parse::<IndexSet>().map_err(|e| ctx.err(t.col, e))
}

fn need<'m>(ctx: &LineCtx, f: &'m BTreeMap<String, (String, usize)>, k: &str) -> Result<&'m (String, usize), FileError> {
    f.get(k).ok_or_else(|| ctx.err(1, format!("missing `{k}`")))
}

/// Dimension of a region literal, from its first box.
fn region_dim(s: &str) -> usize {
    let s = s.trim();
    if s == "empty" || s == "pt" {
        return 0;
    }
    let first = split_depth0(s, '|')[0];
    split_depth0(first.trim(), 'x').len()
}

pub fn parse_atlas(text: &str) -> Result<Atlas, FileError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
    match lines.next() {
        Some((_, l)) if l.trim() == HEADER => {}
        Some((n, _)) => return Err(FileError { line: n + 1, col: 1, msg: format!("expected header `{HEADER}`") }),
        None => return Err(FileError { line: 1, col: 1, msg: "empty file".into() }),
    }
    let mut atlas: Option<Atlas> = None;
    let mut space: Option<Vec<bool>> = None;
    for (n, raw) in lines {
        let ctx = LineCtx { line: n + 1 };
        let toks = tokens(raw);
        let head = toks[0].text;
        match head {
            "atlas" => {
                if toks.len() != 4 || toks[2].text != "dim" {
                    return Err(ctx.err(1, "expected `atlas <name> dim <D>`"));
                }
                let d: i64 = toks[3].text.parse().map_err(|_| ctx.err(toks[3].col, "bad dimension"))?;
                atlas = Some(Atlas::new(toks[1].text, d, vec![]));
            }
            "space" => {
                let dim: usize = toks.get(1).and_then(|t| t.text.parse().ok()).ok_or_else(|| ctx.err(1, "expected `space <n>`"))?;
                let f = fields(&ctx, &toks[2..], &["periodic"])?;
                let per = match f.get("periodic") {
                    Some((v, c)) => parse_axes(&ctx, *c, v, dim)?,
                    None => vec![false; dim],
                };
                space = Some(per);
            }
            "chart" => {
                let a = atlas.as_mut().ok_or_else(|| ctx.err(1, "`chart` before `atlas`"))?;
                let sp = space.clone().ok_or_else(|| ctx.err(1, "`chart` before `space`"))?;
                let id = parse_index(&ctx, toks.get(1).ok_or_else(|| ctx.err(1, "missing index set"))?)?;
                let f = fields(&ctx, &toks[2..], &["domain", "periodic", "obs", "section", "footprint", "zeros", "embed"])?;
                let (dom_s, dom_c) = need(&ctx, &f, "domain")?;
                let dim = region_dim(dom_s);
                let per = match f.get("periodic") {
                    Some((v, c)) => parse_axes(&ctx, *c, v, dim)?,
                    None => vec![false; dim],
                };
                let domain = parse_region(&ctx, *dom_c, dom_s, &per)?;
                let (obs_s, obs_c) = need(&ctx, &f, "obs")?;
                let obs: usize = obs_s.trim().parse().map_err(|_| ctx.err(*obs_c, "bad obstruction dimension"))?;
                let (sec_s, sec_c) = need(&ctx, &f, "section")?;
                let section = parse_exprs(&ctx, *sec_c, sec_s, dim)?;
                if section.out_dim != obs {
                    return Err(ctx.err(*sec_c, format!("section has {} components, obs is {obs}", section.out_dim)));
                }
                let (fp_s, fp_c) = need(&ctx, &f, "footprint")?;
                let footprint = parse_exprs(&ctx, *fp_c, fp_s, dim)?;
                if footprint.out_dim != sp.len() {
                    return Err(ctx.err(*fp_c, "footprint map does not land in the space"));
                }
                let zeros = match f.get("zeros") {
                    Some((v, c)) => Some(parse_region(&ctx, *c, v, &per)?),
                    None => None,
                };
                let embedding = match f.get("embed") {
                    Some((v, c)) => Some(parse_exprs(&ctx, *c, v, dim)?),
                    None => None,
                };
                if a.charts.contains_key(&id) {
                    return Err(ctx.err(1, format!("duplicate chart {id}")));
                }
                a.add_chart(Chart { id, domain, obs_dim: obs, section, footprint, space_periodic: sp, zeros, embedding });
            }
            "change" => {
                let a = atlas.as_mut().ok_or_else(|| ctx.err(1, "`change` before `atlas`"))?;
                if toks.len() < 4 || toks[2].text != "->" {
                    return Err(ctx.err(1, "expected `change <I> -> <J> ...`"));
                }
                let i = parse_index(&ctx, &toks[1])?;
                let j = parse_index(&ctx, &toks[3])?;
                let (ci, cj) = match (a.charts.get(&i), a.charts.get(&j)) {
                    (Some(ci), Some(cj)) => (ci, cj),
                    _ => return Err(ctx.err(toks[1].col, format!("change {i} -> {j} refers to an undeclared chart"))),
                };
                let f = fields(&ctx, &toks[4..], &["domain", "map", "window", "linear"])?;
                let (dom_s, dom_c) = need(&ctx, &f, "domain")?;
                let domain = parse_region(&ctx, *dom_c, dom_s, ci.periodic())?;
                let (map_s, map_c) = need(&ctx, &f, "map")?;
                let map = parse_exprs(&ctx, *map_c, map_s, ci.dim())?;
                if map.out_dim != cj.dim() {
                    return Err(ctx.err(*map_c, format!("map has {} components, U_{j} has dimension {}", map.out_dim, cj.dim())));
                }
                let mut windows = Vec::new();
                if let Some((w, c)) = f.get("window") {
                    for part in w.split_whitespace().filter(|p| *p != "window") {
                        let (ax, cut) = part.split_once(':').ok_or_else(|| ctx.err(*c, format!("bad window `{part}`")))?;
                        let k: usize = ax.parse().map_err(|_| ctx.err(*c, format!("bad window axis `{ax}`")))?;
                        if k == 0 || k > ci.dim() || !ci.periodic()[k - 1] {
                            return Err(ctx.err(*c, format!("window axis {k} is not a periodic axis of U_{i}")));
                        }
                        windows.push((k - 1, parse_q(&ctx, *c, cut)?));
                    }
                }
                let (lin_s, lin_c) = need(&ctx, &f, "linear")?;
                let linear = parse_matrix(&ctx, *lin_c, lin_s)?;
                if linear.rows != cj.obs_dim || linear.cols != ci.obs_dim {
                    return Err(ctx.err(*lin_c, format!("linear part must be {}x{}", cj.obs_dim, ci.obs_dim)));
                }
                let out_per = cj.periodic().to_vec();
                a.add_change(CoordChange::new(i, j, domain, map, windows, linear, out_per));
            }
            "reduction" => {
                let a = atlas.as_mut().ok_or_else(|| ctx.err(1, "`reduction` before `atlas`"))?;
                let name = toks.get(1).ok_or_else(|| ctx.err(1, "missing reduction name"))?.text.to_string();
                let rest_start = toks.get(2).map(|t| t.col - 1).unwrap_or(raw.len());
                let mut sets = BTreeMap::new();
                for part in raw[rest_start..].split(';') {
                    let part = part.trim();
                    if part.is_empty() {
                        continue;
                    }
                    let pt = tokens(part);
                    let id = parse_index(&ctx, &pt[0])?;
                    let c = a.charts.get(&id).ok_or_else(|| ctx.err(rest_start + 1, format!("reduction set for undeclared chart {id}")))?;
                    let body = part[pt[0].text.len()..].trim();
                    sets.insert(id, parse_region(&ctx, rest_start + 1, body, c.periodic())?);
                }
                a.reductions.push(ReductionSpec { name, sets });
            }
            "orientation" => {
                let a = atlas.as_mut().ok_or_else(|| ctx.err(1, "`orientation` before `atlas`"))?;
                if toks.len() != 3 {
                    return Err(ctx.err(1, "expected `orientation <I> <+1|-1>`"));
                }
                let id = parse_index(&ctx, &toks[1])?;
                let s = match toks[2].text {
                    "+1" | "1" => 1,
                    "-1" => -1,
                    o => return Err(ctx.err(toks[2].col, format!("bad orientation `{o}`"))),
                };
                a.orientation.insert(id, s);
            }
            other => return Err(ctx.err(1, format!("unknown directive `{other}`"))),
        }
    }
    let mut a = atlas.ok_or_else(|| FileError { line: 1, col: 1, msg: "missing `atlas` line".into() })?;
    a.space_periodic = space.ok_or_else(|| FileError { line: 1, col: 1, msg: "missing `space` line".into() })?;
    Ok(a)
}

fn fmt_axes(p: &[bool]) -> Option<String> {
    let v: Vec<String> = p.iter().enumerate().filter(|(_, &b)| b).map(|(k, _)| (k + 1).to_string()).collect();
    if v.is_empty() {
        None
    } else {
        Some(v.join(","))
    }
}

fn fmt_matrix(m: &RationalMatrix) -> String {
    if m.rows == 0 || m.cols == 0 {
        return format!("zeros({},{})", m.rows, m.cols);
    }
    let rows: Vec<String> = (0..m.rows)
        .map(|i| format!("[{}]", (0..m.cols).map(|j| m[(i, j)].to_string()).collect::<Vec<_>>().join(",")))
        .collect();
    format!("[{}]", rows.join(","))
}

fn fmt_exprs(m: &ExprMap) -> String {
    let parts: Vec<String> = m.components.iter().map(Expr::to_string).collect();
    format!("[{}]", parts.join(", "))
}

/// Canonical text of an atlas. Composite changes without an expression
/// form cannot be written.
pub fn print_atlas(a: &Atlas) -> Result<String, String> {
    let mut s = String::new();
    writeln!(s, "{HEADER}").unwrap();
    writeln!(s, "atlas {} dim {}", a.name, a.dim).unwrap();
    match fmt_axes(&a.space_periodic) {
        Some(p) => writeln!(s, "space {} periodic {p}", a.space_periodic.len()).unwrap(),
        None => writeln!(s, "space {}", a.space_periodic.len()).unwrap(),
    }
    for c in a.charts.values() {
        write!(s, "chart {} domain {}", c.id, c.domain).unwrap();
        if let Some(p) = fmt_axes(c.periodic()) {
            write!(s, " periodic {p}").unwrap();
        }
        write!(s, " obs {} section {} footprint {}", c.obs_dim, fmt_exprs(&c.section), fmt_exprs(&c.footprint)).unwrap();
        if let Some(z) = &c.zeros {
            write!(s, " zeros {z}").unwrap();
        }
        if let Some(e) = &c.embedding {
            write!(s, " embed {}", fmt_exprs(e)).unwrap();
        }
        s.push('\n');
    }
    for cc in a.changes.values() {
        let crate::chart::MapRepr::Expr { map, windows } = &cc.repr else {
            return Err(format!("change {} has no expression form", cc.name()));
        };
        write!(s, "change {} -> {} domain {} map {}", cc.source, cc.target, cc.domain, fmt_exprs(map)).unwrap();
        if !windows.is_empty() {
            let w: Vec<String> = windows.iter().map(|(k, c)| format!("{}:{c}", k + 1)).collect();
            write!(s, " window {}", w.join(" ")).unwrap();
        }
        writeln!(s, " linear {}", fmt_matrix(&cc.linear)).unwrap();
    }
    for r in &a.reductions {
        let parts: Vec<String> = r.sets.iter().map(|(i, reg)| format!("{i} {reg}")).collect();
        writeln!(s, "reduction {} {}", r.name, parts.join(" ; ")).unwrap();
    }
    for (i, o) in &a.orientation {
        writeln!(s, "orientation {i} {}", if *o > 0 { "+1" } else { "-1" }).unwrap();
    }
    Ok(s)
}
