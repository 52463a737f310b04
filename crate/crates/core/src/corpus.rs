//! Alphabets, symbol sequences and the context-statistics trie.
//!
//! Contexts are stored reversed: the path from the root spells a context
//! from its most recent symbol backward, so the trie parent of a node is
//! its maximal proper suffix. Node ids are assigned breadth-first with
//! children visited in symbol order, which makes id order the canonical
//! context order (by length, then by reversed symbol string).

use std::collections::HashMap;

use crate::error::{Error, Result};

/// Index of a symbol in its alphabet, `0..m`.
pub type Symbol = u8;

const CASEFOLDED_70: &str = "printable-ascii-casefolded-70";
const BYTE_256: &str = "byte-256";
const CUSTOM_PREFIX: &str = "custom:";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AlphabetProfile {
    /// Printable ASCII with uppercase folded to lowercase, plus one
    /// fallback symbol for every non-printing byte.
    PrintableAsciiCasefolded70,
    /// Identity mapping over all byte values.
    Byte256,
    /// Explicit list of single-byte symbols. Unlisted bytes map to symbol 0.
    Custom(Vec<u8>),
}

impl AlphabetProfile {
    /// Parses `printable-ascii-casefolded-70`, `byte-256` or `custom:<bytes>`
    /// (bytes escaped as in model files, e.g. `custom:01`).
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            CASEFOLDED_70 | "ascii70" => Ok(Self::PrintableAsciiCasefolded70),
            BYTE_256 | "bytes" => Ok(Self::Byte256),
            _ => match name.strip_prefix(CUSTOM_PREFIX) {
                Some(list) => {
                    let bytes = unescape_bytes(list)
                        .ok_or_else(|| Error::UnknownProfile(name.to_string()))?;
                    Ok(Self::Custom(bytes))
                }
                None => Err(Error::UnknownProfile(name.to_string())),
            },
        }
    }

    pub fn descriptor(&self) -> String {
        match self {
            Self::PrintableAsciiCasefolded70 => CASEFOLDED_70.to_string(),
            Self::Byte256 => BYTE_256.to_string(),
            Self::Custom(bytes) => format!("{CUSTOM_PREFIX}{}", escape_bytes(bytes)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alphabet {
    profile: AlphabetProfile,
    /// Representative byte of each symbol, used when rendering.
    symbols: Vec<u8>,
    byte_map: [Symbol; 256],
    fallback: Symbol,
}

impl Alphabet {
    pub fn build(profile: &AlphabetProfile) -> Result<Self> {
        let (symbols, byte_map, fallback) = match profile {
            AlphabetProfile::PrintableAsciiCasefolded70 => {
                // Symbol 0 is the fallback and renders as a newline.
                let mut symbols = vec![b'\n'];
                symbols.extend((0x20u8..=0x7e).filter(|b| !b.is_ascii_uppercase()));
                let mut byte_map = [0 as Symbol; 256];
                for (idx, &b) in symbols.iter().enumerate().skip(1) {
                    byte_map[b as usize] = idx as Symbol;
                }
                for b in b'A'..=b'Z' {
                    byte_map[b as usize] = byte_map[b.to_ascii_lowercase() as usize];
                }
                (symbols, byte_map, 0)
            }
            AlphabetProfile::Byte256 => {
                let symbols: Vec<u8> = (0..=255u8).collect();
                let mut byte_map = [0 as Symbol; 256];
                for b in 0..=255u8 {
                    byte_map[b as usize] = b;
                }
                (symbols, byte_map, 0)
            }
            AlphabetProfile::Custom(list) => {
                if list.is_empty() {
                    return Err(Error::EmptyAlphabet);
                }
                if list.len() < 2 {
                    return Err(Error::AlphabetTooSmall(list.len()));
                }
                let mut seen = [false; 256];
                for &b in list {
                    if seen[b as usize] {
                        return Err(Error::DuplicateSymbol(b));
                    }
                    seen[b as usize] = true;
                }
                let mut byte_map = [0 as Symbol; 256];
                for (idx, &b) in list.iter().enumerate() {
                    byte_map[b as usize] = idx as Symbol;
                }
                (list.clone(), byte_map, 0)
            }
        };
        Ok(Self {
            profile: profile.clone(),
            symbols,
            byte_map,
            fallback,
        })
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Self::build(&AlphabetProfile::parse(name)?)
    }

    pub fn printable_ascii_70() -> Self {
        Self::build(&AlphabetProfile::PrintableAsciiCasefolded70).expect("built-in profile")
    }

    pub fn byte_256() -> Self {
        Self::build(&AlphabetProfile::Byte256).expect("built-in profile")
    }

    pub fn profile(&self) -> &AlphabetProfile {
        &self.profile
    }

    /// Alphabet size `m`.
    pub fn size(&self) -> usize {
        self.symbols.len()
    }

    pub fn fallback(&self) -> Symbol {
        self.fallback
    }

    pub fn map_byte(&self, byte: u8) -> Symbol {
        self.byte_map[byte as usize]
    }

    pub fn symbol_byte(&self, symbol: Symbol) -> u8 {
        self.symbols[symbol as usize]
    }

    /// True when mapping bytes through this alphabet can lose information.
    pub fn is_lossy(&self) -> bool {
        !matches!(self.profile, AlphabetProfile::Byte256)
    }

    pub fn ingest(&self, bytes: &[u8]) -> SymbolSequence {
        SymbolSequence {
            symbols: bytes.iter().map(|&b| self.map_byte(b)).collect(),
        }
    }

    pub fn render(&self, symbols: &[Symbol]) -> Vec<u8> {
        symbols.iter().map(|&s| self.symbol_byte(s)).collect()
    }

    /// Parses a context written with representative bytes (e.g. `"blish"`).
    pub fn parse_context(&self, text: &[u8]) -> Vec<Symbol> {
        text.iter().map(|&b| self.map_byte(b)).collect()
    }

    pub fn check_symbol(&self, symbol: Symbol) -> Result<()> {
        if (symbol as usize) < self.size() {
            Ok(())
        } else {
            Err(Error::SymbolOutOfRange {
                symbol,
                size: self.size(),
            })
        }
    }
}

/// Backslash-hex escaping for bytes outside `0x21..=0x7e`, plus `"` and `\`.
pub fn escape_bytes(bytes: &[u8]) -> String {
    let mut out = String::with_capacity(bytes.len());
    for &b in bytes {
        if (0x21..=0x7e).contains(&b) && b != b'\\' && b != b'"' {
            out.push(b as char);
        } else {
            out.push_str(&format!("\\x{b:02x}"));
        }
    }
    out
}

pub fn unescape_bytes(text: &str) -> Option<Vec<u8>> {
    let raw = text.as_bytes();
    let mut out = Vec::with_capacity(raw.len());
    let mut i = 0;
    while i < raw.len() {
        if raw[i] == b'\\' {
            if raw.get(i + 1) != Some(&b'x') || i + 4 > raw.len() {
                return None;
            }
            let hex = std::str::from_utf8(&raw[i + 2..i + 4]).ok()?;
            out.push(u8::from_str_radix(hex, 16).ok()?);
            i += 4;
        } else {
            out.push(raw[i]);
            i += 1;
        }
    }
    Some(out)
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SymbolSequence {
    symbols: Vec<Symbol>,
}

impl SymbolSequence {
    pub fn new(symbols: Vec<Symbol>, alphabet_size: usize) -> Result<Self> {
        if let Some(&bad) = symbols.iter().find(|&&s| s as usize >= alphabet_size) {
            return Err(Error::SymbolOutOfRange {
                symbol: bad,
                size: alphabet_size,
            });
        }
        Ok(Self { symbols })
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn as_slice(&self) -> &[Symbol] {
        &self.symbols
    }

    pub fn into_inner(self) -> Vec<Symbol> {
        self.symbols
    }

    pub fn extend_from(&mut self, other: &SymbolSequence) {
        self.symbols.extend_from_slice(&other.symbols);
    }
}

impl AsRef<[Symbol]> for SymbolSequence {
    fn as_ref(&self) -> &[Symbol] {
        &self.symbols
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(u32);

impl NodeId {
    pub const ROOT: NodeId = NodeId(0);

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone)]
struct StatsNode {
    count: u64,
    parent: u32,
    /// Oldest symbol of the context (the edge label from the parent).
    symbol: Symbol,
    depth: u16,
    child_start: u32,
    child_len: u32,
    next_start: u32,
    next_len: u32,
}

/// Counts `c(w)` and `c(σ|w)` for every context up to a depth bound.
///
/// Position `i` contributes to context `w` only when `i >= |w|`, so
/// `c(w) = Σ_σ c(σ|w)` holds exactly for every node.
#[derive(Debug, Clone)]
pub struct ContextStats {
    nodes: Vec<StatsNode>,
    child_syms: Vec<Symbol>,
    child_ids: Vec<u32>,
    next_syms: Vec<Symbol>,
    next_counts: Vec<u64>,
    depth_bound: usize,
    alphabet_size: usize,
}

#[derive(Default)]
struct BuildNode {
    count: u64,
    parent: u32,
    symbol: Symbol,
    depth: u16,
}

impl ContextStats {
    pub fn count(seq: &[Symbol], alphabet_size: usize, depth_bound: usize) -> Self {
        let mut nodes = vec![BuildNode::default()];
        let mut children: HashMap<(u32, Symbol), u32> = HashMap::new();
        let mut next: HashMap<(u32, Symbol), u64> = HashMap::new();

        for (i, &sym) in seq.iter().enumerate() {
            let mut node = 0u32;
            nodes[0].count += 1;
            *next.entry((0, sym)).or_insert(0) += 1;
            for d in 1..=depth_bound.min(i) {
                let x = seq[i - d];
                let len = nodes.len() as u32;
                let child = *children.entry((node, x)).or_insert_with(|| {
                    nodes.push(BuildNode {
                        count: 0,
                        parent: node,
                        symbol: x,
                        depth: d as u16,
                    });
                    len
                });
                node = child;
                nodes[node as usize].count += 1;
                *next.entry((node, sym)).or_insert(0) += 1;
            }
        }

        let mut child_lists: Vec<Vec<(Symbol, u32)>> = vec![Vec::new(); nodes.len()];
        for (&(parent, sym), &child) in &children {
            child_lists[parent as usize].push((sym, child));
        }
        let mut next_lists: Vec<Vec<(Symbol, u64)>> = vec![Vec::new(); nodes.len()];
        for (&(node, sym), &c) in &next {
            next_lists[node as usize].push((sym, c));
        }
        drop(children);
        drop(next);

        // Breadth-first renumbering in symbol order.
        let mut order = Vec::with_capacity(nodes.len());
        let mut new_id = vec![0u32; nodes.len()];
        order.push(0u32);
        let mut head = 0;
        while head < order.len() {
            let old = order[head] as usize;
            new_id[old] = head as u32;
            head += 1;
            let list = &mut child_lists[old];
            list.sort_unstable_by_key(|&(s, _)| s);
            order.extend(list.iter().map(|&(_, c)| c));
        }

        let mut out = ContextStats {
            nodes: Vec::with_capacity(nodes.len()),
            child_syms: Vec::with_capacity(nodes.len().saturating_sub(1)),
            child_ids: Vec::with_capacity(nodes.len().saturating_sub(1)),
            next_syms: Vec::new(),
            next_counts: Vec::new(),
            depth_bound,
            alphabet_size,
        };
        for &old in &order {
            let old = old as usize;
            let b = &nodes[old];
            let child_start = out.child_syms.len() as u32;
            for &(s, c) in &child_lists[old] {
                out.child_syms.push(s);
                out.child_ids.push(new_id[c as usize]);
            }
            let next_list = &mut next_lists[old];
            next_list.sort_unstable_by_key(|&(s, _)| s);
            let next_start = out.next_syms.len() as u32;
            for &(s, c) in next_list.iter() {
                out.next_syms.push(s);
                out.next_counts.push(c);
            }
            out.nodes.push(StatsNode {
                count: b.count,
                parent: if old == 0 { 0 } else { new_id[b.parent as usize] },
                symbol: b.symbol,
                depth: b.depth,
                child_start,
                child_len: child_lists[old].len() as u32,
                next_start,
                next_len: next_list.len() as u32,
            });
        }
        out
    }

    pub fn root(&self) -> NodeId {
        NodeId::ROOT
    }

    pub fn depth_bound(&self) -> usize {
        self.depth_bound
    }

    pub fn alphabet_size(&self) -> usize {
        self.alphabet_size
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// `c(w)`.
    pub fn context_count(&self, node: NodeId) -> u64 {
        self.nodes[node.index()].count
    }

    pub fn depth(&self, node: NodeId) -> usize {
        self.nodes[node.index()].depth as usize
    }

    /// Maximal proper suffix; the root is its own parent.
    pub fn parent(&self, node: NodeId) -> NodeId {
        NodeId(self.nodes[node.index()].parent)
    }

    /// The left extension `xw` of `w`, if it occurred.
    pub fn child(&self, node: NodeId, x: Symbol) -> Option<NodeId> {
        let n = &self.nodes[node.index()];
        let range = n.child_start as usize..(n.child_start + n.child_len) as usize;
        let syms = &self.child_syms[range.clone()];
        syms.binary_search(&x)
            .ok()
            .map(|k| NodeId(self.child_ids[range.start + k]))
    }

    /// Left extensions in symbol order.
    pub fn children(&self, node: NodeId) -> impl Iterator<Item = (Symbol, NodeId)> + '_ {
        let n = &self.nodes[node.index()];
        let range = n.child_start as usize..(n.child_start + n.child_len) as usize;
        self.child_syms[range.clone()]
            .iter()
            .copied()
            .zip(self.child_ids[range].iter().map(|&c| NodeId(c)))
    }

    /// Nonzero `c(σ|w)` in symbol order.
    pub fn next_counts(&self, node: NodeId) -> impl Iterator<Item = (Symbol, u64)> + '_ {
        let n = &self.nodes[node.index()];
        let range = n.next_start as usize..(n.next_start + n.next_len) as usize;
        self.next_syms[range.clone()]
            .iter()
            .copied()
            .zip(self.next_counts[range].iter().copied())
    }

    /// `c(σ|w)`.
    pub fn next_count(&self, node: NodeId, sym: Symbol) -> u64 {
        let n = &self.nodes[node.index()];
        let range = n.next_start as usize..(n.next_start + n.next_len) as usize;
        match self.next_syms[range.clone()].binary_search(&sym) {
            Ok(k) => self.next_counts[range.start + k],
            Err(_) => 0,
        }
    }

    /// Dense vector of `c(σ|w)` over the whole alphabet.
    pub fn dense_next_counts(&self, node: NodeId) -> Vec<u64> {
        let mut dense = vec![0; self.alphabet_size];
        for (s, c) in self.next_counts(node) {
            dense[s as usize] = c;
        }
        dense
    }

    /// Looks up a context given in forward order.
    pub fn lookup(&self, context: &[Symbol]) -> Option<NodeId> {
        if context.len() > self.depth_bound {
            return None;
        }
        context
            .iter()
            .rev()
            .try_fold(NodeId::ROOT, |node, &x| self.child(node, x))
    }

    /// Context string of a node in forward order.
    pub fn context_of(&self, node: NodeId) -> Vec<Symbol> {
        let mut out = Vec::with_capacity(self.depth(node));
        let mut cur = node;
        while cur != NodeId::ROOT {
            out.push(self.nodes[cur.index()].symbol);
            cur = self.parent(cur);
        }
        out
    }

    /// Counts for a context given in forward order; zero when unseen.
    pub fn count_of(&self, context: &[Symbol]) -> u64 {
        self.lookup(context).map_or(0, |n| self.context_count(n))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn abc(text: &str) -> Vec<Symbol> {
        text.bytes().map(|b| b - b'a').collect()
    }

    #[test]
    fn seventy_symbol_profile() {
        let a = Alphabet::printable_ascii_70();
        assert_eq!(a.size(), 70);
        assert_eq!(a.map_byte(b'A'), a.map_byte(b'a'));
        assert_eq!(a.map_byte(b'\t'), a.fallback());
        assert_eq!(a.map_byte(0xff), a.fallback());
        assert_ne!(a.map_byte(b' '), a.fallback());
    }

    #[test]
    fn custom_and_byte_profiles() {
        let a = Alphabet::from_name("custom:01").unwrap();
        assert_eq!(a.size(), 2);
        assert_eq!(a.map_byte(b'0'), 0);
        assert_eq!(a.map_byte(b'1'), 1);
        let b = Alphabet::byte_256();
        assert_eq!(b.size(), 256);
        assert!((0..=255u8).all(|x| b.map_byte(x) == x));
    }

    #[test]
    fn custom_profile_errors() {
        assert!(matches!(
            Alphabet::build(&AlphabetProfile::Custom(vec![])),
            Err(Error::EmptyAlphabet)
        ));
        assert!(matches!(
            Alphabet::build(&AlphabetProfile::Custom(b"aba".to_vec())),
            Err(Error::DuplicateSymbol(b'a'))
        ));
        assert!(matches!(
            Alphabet::from_name("klingon"),
            Err(Error::UnknownProfile(_))
        ));
    }

    #[test]
    fn ingest_examples() {
        let a = Alphabet::printable_ascii_70();
        let seq = a.ingest(b"AbA");
        let s = seq.as_slice();
        assert_eq!(s.len(), 3);
        assert_eq!(s[0], a.map_byte(b'a'));
        assert_eq!(s[1], a.map_byte(b'b'));
        assert_eq!(s[0], s[2]);
        assert!(a.ingest(b"").is_empty());
        let bin = Alphabet::from_name("custom:01").unwrap();
        assert_eq!(bin.ingest(b"010").as_slice(), &[0, 1, 0]);
    }

    #[test]
    fn escape_round_trip() {
        let raw = b"a b\\\"\x00\xff~";
        let esc = escape_bytes(raw);
        assert!(!esc.contains(' '));
        assert_eq!(unescape_bytes(&esc).unwrap(), raw);
    }

    #[test]
    fn counts_abab() {
        let stats = ContextStats::count(&abc("abab"), 2, 1);
        let root = stats.root();
        assert_eq!(stats.context_count(root), 4);
        assert_eq!(stats.next_count(root, 0), 2);
        assert_eq!(stats.next_count(root, 1), 2);
        let a = stats.lookup(&abc("a")).unwrap();
        let b = stats.lookup(&abc("b")).unwrap();
        assert_eq!(stats.next_count(a, 1), 2);
        assert_eq!(stats.next_count(b, 0), 1);
        assert_eq!(stats.context_count(b), 1);
    }

    #[test]
    fn counts_aaaa_depth_two() {
        let stats = ContextStats::count(&abc("aaaa"), 1, 2);
        let aa = stats.lookup(&abc("aa")).unwrap();
        assert_eq!(stats.next_count(aa, 0), 2);
        assert_eq!(stats.context_of(aa), abc("aa"));
    }

    #[test]
    fn empty_sequence() {
        let stats = ContextStats::count(&[], 3, 4);
        assert_eq!(stats.context_count(stats.root()), 0);
        assert_eq!(stats.children(stats.root()).count(), 0);
        assert_eq!(stats.node_count(), 1);
    }

    #[test]
    fn ids_are_canonical() {
        let stats = ContextStats::count(&abc("abcabcbbca"), 3, 3);
        let ctxs: Vec<Vec<Symbol>> = (0..stats.node_count())
            .map(|i| {
                let mut c = stats.context_of(NodeId(i as u32));
                c.reverse();
                c
            })
            .collect();
        for w in ctxs.windows(2) {
            assert!((w[0].len(), &w[0]) < (w[1].len(), &w[1]));
        }
    }
}
