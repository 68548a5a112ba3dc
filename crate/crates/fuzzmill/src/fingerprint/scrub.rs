//! Byte-level scrub rules: rewrite semantically irrelevant embedded data
//! (timestamps, revision hashes, version strings) to a fixed filler so it
//! cannot defeat change detection.

use regex::bytes::{Regex, RegexBuilder};

use crate::digest::Digest;

use super::FingerprintError;

/// Matched bytes are rewritten to this filler, one byte per matched byte, so
/// offsets elsewhere in the blob are untouched. NUL never re-matches any
/// rule, which is what makes normalization idempotent.
pub const FILLER: u8 = 0x00;

#[derive(Debug, Clone)]
enum RuleKind {
    /// Byte-regex; every match is overwritten with [`FILLER`].
    Pattern(Regex),
    /// Zero the contents of a named ELF section (e.g. `.note.gnu.build-id`).
    StripSection(String),
}

#[derive(Debug, Clone)]
struct ScrubRule {
    name: String,
    kind: RuleKind,
}

/// An ordered set of scrub rules.
#[derive(Debug, Clone, Default)]
pub struct ScrubRules {
    rules: Vec<ScrubRule>,
}

const DEFAULT_PATTERNS: &[(&str, &str)] = &[
    (
        "timestamp-iso8601",
        r"\d{4}-\d{2}-\d{2}[T ]\d{2}:\d{2}:\d{2}(?:\.\d+)?(?:Z|[+-]\d{2}:?\d{2})?",
    ),
    (
        "timestamp-ctime",
        r"(?:Mon|Tue|Wed|Thu|Fri|Sat|Sun) (?:Jan|Feb|Mar|Apr|May|Jun|Jul|Aug|Sep|Oct|Nov|Dec) [ 0-3]\d \d{2}:\d{2}:\d{2} \d{4}",
    ),
    ("revision-hex40", r"\b[0-9a-fA-F]{40}\b"),
    ("semver", r"\bv?\d+\.\d+\.\d+(?:-[0-9A-Za-z.-]+)?"),
];

impl ScrubRules {
    /// No rules: normalization is the identity.
    pub fn empty() -> Self {
        ScrubRules::default()
    }

    /// The shipped defaults: ISO-8601 and ctime timestamps, 40-hex revision
    /// strings, and semantic-version strings.
    pub fn defaults() -> Self {
        let mut rules = ScrubRules::empty();
        for (name, pat) in DEFAULT_PATTERNS {
            rules.add_pattern(name, pat).expect("default pattern compiles");
        }
        rules
    }

    pub fn add_pattern(&mut self, name: &str, pattern: &str) -> Result<(), FingerprintError> {
        let re = RegexBuilder::new(pattern)
            .unicode(false)
            .build()
            .map_err(|e| FingerprintError::BadRule {
                name: name.to_string(),
                detail: e.to_string(),
            })?;
        self.rules.push(ScrubRule {
            name: name.to_string(),
            kind: RuleKind::Pattern(re),
        });
        Ok(())
    }

    pub fn add_strip_section(&mut self, section: &str) {
        self.rules.push(ScrubRule {
            name: format!("strip-section:{section}"),
            kind: RuleKind::StripSection(section.to_string()),
        });
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn rule_names(&self) -> Vec<String> {
        self.rules.iter().map(|r| r.name.clone()).collect()
    }

    /// Stable hash over the rule list; recorded in the fingerprint cache so
    /// digests produced under different rulesets never mix.
    pub fn ruleset_hash(&self) -> Digest {
        let mut parts: Vec<Vec<u8>> = Vec::new();
        for r in &self.rules {
            parts.push(r.name.clone().into_bytes());
            match &r.kind {
                RuleKind::Pattern(re) => parts.push(re.as_str().as_bytes().to_vec()),
                RuleKind::StripSection(s) => parts.push(s.as_bytes().to_vec()),
            }
        }
        let refs: Vec<&[u8]> = parts.iter().map(|p| p.as_slice()).collect();
        Digest::of_parts(&refs)
    }

    /// Apply every rule in order. Returns the normalized bytes and the names
    /// of the rules that actually rewrote something.
    pub fn apply(&self, bytes: &[u8]) -> (Vec<u8>, Vec<String>) {
        let mut out = bytes.to_vec();
        let mut applied = Vec::new();
        for rule in &self.rules {
            let changed = match &rule.kind {
                RuleKind::Pattern(re) => {
                    let mut changed = false;
                    // Collect ranges first; overwrite in place to keep length.
                    let ranges: Vec<(usize, usize)> =
                        re.find_iter(&out).map(|m| (m.start(), m.end())).collect();
                    for (s, e) in ranges {
                        out[s..e].fill(FILLER);
                        changed = true;
                    }
                    changed
                }
                RuleKind::StripSection(section) => zero_elf_section(&mut out, section),
            };
            if changed {
                applied.push(rule.name.clone());
            }
        }
        (out, applied)
    }
}

// Minimal ELF64 little-endian section zeroing. Anything that does not parse
// cleanly is left untouched; this is a scrub rule, not a loader.
fn zero_elf_section(bytes: &mut [u8], section: &str) -> bool {
    const SHT_NOBITS: u32 = 8;
    if bytes.len() < 0x40 || &bytes[..4] != b"\x7fELF" || bytes[4] != 2 || bytes[5] != 1 {
        return false;
    }
    let shoff = read_u64(bytes, 0x28) as usize;
    let shentsize = read_u16(bytes, 0x3a) as usize;
    let shnum = read_u16(bytes, 0x3c) as usize;
    let shstrndx = read_u16(bytes, 0x3e) as usize;
    if shentsize < 0x40 || shstrndx >= shnum {
        return false;
    }
    let sh = |i: usize| shoff.checked_add(i.checked_mul(shentsize)?);
    let Some(str_hdr) = sh(shstrndx) else { return false };
    if str_hdr + 0x40 > bytes.len() {
        return false;
    }
    let str_off = read_u64(bytes, str_hdr + 24) as usize;
    let str_size = read_u64(bytes, str_hdr + 32) as usize;
    if str_off.saturating_add(str_size) > bytes.len() {
        return false;
    }
    let mut changed = false;
    for i in 0..shnum {
        let Some(hdr) = sh(i) else { return changed };
        if hdr + 0x40 > bytes.len() {
            return changed;
        }
        let name_idx = read_u32(bytes, hdr) as usize;
        let sh_type = read_u32(bytes, hdr + 4);
        let name = section_name(&bytes[str_off..str_off + str_size], name_idx);
        if name != Some(section) || sh_type == SHT_NOBITS {
            continue;
        }
        let off = read_u64(bytes, hdr + 24) as usize;
        let size = read_u64(bytes, hdr + 32) as usize;
        if off.saturating_add(size) <= bytes.len() {
            let already_zero = bytes[off..off + size].iter().all(|&b| b == 0);
            bytes[off..off + size].fill(0);
            if !already_zero && size > 0 {
                changed = true;
            }
        }
    }
    changed
}

fn section_name(strtab: &[u8], idx: usize) -> Option<&str> {
    let tail = strtab.get(idx..)?;
    let end = tail.iter().position(|&b| b == 0)?;
    std::str::from_utf8(&tail[..end]).ok()
}

fn read_u16(b: &[u8], off: usize) -> u16 {
    u16::from_le_bytes(b[off..off + 2].try_into().unwrap())
}
fn read_u32(b: &[u8], off: usize) -> u32 {
    u32::from_le_bytes(b[off..off + 4].try_into().unwrap())
}
fn read_u64(b: &[u8], off: usize) -> u64 {
    u64::from_le_bytes(b[off..off + 8].try_into().unwrap())
}

#[cfg(test)]
pub(crate) mod test_elf {
    /// Build a minimal ELF64 with the given named sections and contents.
    /// Layout: ELF header, section contents, then section headers.
    pub fn build(sections: &[(&str, &[u8])]) -> Vec<u8> {
        let mut strtab = vec![0u8];
        let mut name_offsets = Vec::new();
        for (name, _) in sections {
            name_offsets.push(strtab.len() as u32);
            strtab.extend_from_slice(name.as_bytes());
            strtab.push(0);
        }
        let shstrtab_name_off = strtab.len() as u32;
        strtab.extend_from_slice(b".shstrtab\0");

        let mut body: Vec<u8> = Vec::new();
        let hdr_len = 0x40usize;
        let mut offsets = Vec::new();
        for (_, content) in sections {
            offsets.push(hdr_len + body.len());
            body.extend_from_slice(content);
        }
        let strtab_off = hdr_len + body.len();
        body.extend_from_slice(&strtab);

        let shoff = hdr_len + body.len();
        let shnum = (sections.len() + 2) as u16; // NULL + sections + shstrtab
        let mut out = Vec::new();
        out.extend_from_slice(b"\x7fELF");
        out.push(2); // 64-bit
        out.push(1); // little-endian
        out.push(1); // version
        out.resize(0x10, 0);
        out.extend_from_slice(&2u16.to_le_bytes()); // e_type
        out.extend_from_slice(&62u16.to_le_bytes()); // e_machine x86-64
        out.extend_from_slice(&1u32.to_le_bytes()); // e_version
        out.extend_from_slice(&0u64.to_le_bytes()); // e_entry
        out.extend_from_slice(&0u64.to_le_bytes()); // e_phoff
        out.extend_from_slice(&(shoff as u64).to_le_bytes()); // e_shoff
        out.extend_from_slice(&0u32.to_le_bytes()); // e_flags
        out.extend_from_slice(&0x40u16.to_le_bytes()); // e_ehsize
        out.extend_from_slice(&0u16.to_le_bytes()); // e_phentsize
        out.extend_from_slice(&0u16.to_le_bytes()); // e_phnum
        out.extend_from_slice(&0x40u16.to_le_bytes()); // e_shentsize
        out.extend_from_slice(&shnum.to_le_bytes()); // e_shnum
        out.extend_from_slice(&(shnum - 1).to_le_bytes()); // e_shstrndx
        assert_eq!(out.len(), 0x40);
        out.extend_from_slice(&body);

        let mut push_shdr = |name_off: u32, sh_type: u32, off: usize, size: usize| {
            out.extend_from_slice(&name_off.to_le_bytes());
            out.extend_from_slice(&sh_type.to_le_bytes());
            out.extend_from_slice(&0u64.to_le_bytes()); // flags
            out.extend_from_slice(&0u64.to_le_bytes()); // addr
            out.extend_from_slice(&(off as u64).to_le_bytes());
            out.extend_from_slice(&(size as u64).to_le_bytes());
            out.extend_from_slice(&0u32.to_le_bytes()); // link
            out.extend_from_slice(&0u32.to_le_bytes()); // info
            out.extend_from_slice(&0u64.to_le_bytes()); // addralign
            out.extend_from_slice(&0u64.to_le_bytes()); // entsize
        };
        push_shdr(0, 0, 0, 0); // SHT_NULL
        for (i, (_, content)) in sections.iter().enumerate() {
            push_shdr(name_offsets[i], 1, offsets[i], content.len()); // SHT_PROGBITS
        }
        push_shdr(shstrtab_name_off, 3, strtab_off, strtab.len()); // SHT_STRTAB
        out
    }
}
