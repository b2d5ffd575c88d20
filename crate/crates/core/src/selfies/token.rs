use std::fmt;
use std::str::FromStr;

use crate::smiles::Element;

use super::SelfiesError;

/// Atom payload of a token. `hydrogens` is `None` exactly for the plain
/// form (`[C]`), whose hydrogens are implied by the standard valences.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AtomSymbol {
    pub element: Element,
    pub charge: i8,
    pub hydrogens: Option<u8>,
    pub isotope: Option<u16>,
}

impl AtomSymbol {
    pub fn plain(element: Element) -> AtomSymbol {
        AtomSymbol {
            element,
            charge: 0,
            hydrogens: None,
            isotope: None,
        }
    }

    pub fn is_plain(&self) -> bool {
        self.hydrogens.is_none()
    }

    /// Bonds the atom may still form once placed.
    pub fn capacity(&self) -> u8 {
        let max = self.element.max_valence(self.charge);
        match self.hydrogens {
            None => max,
            Some(h) => max - h.min(max),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SelfiesToken {
    /// Atom bonded to the current atom with the requested order (1..=3).
    Atom {
        bond: u8,
        atom: AtomSymbol,
    },
    /// Branch whose length is read from the next `size` index tokens.
    Branch {
        bond: u8,
        size: u8,
    },
    /// Ring closure whose span is read from the next `size` index tokens.
    Ring {
        bond: u8,
        size: u8,
    },
    Nop,
    /// Separates disconnected fragments.
    Dot,
}

/// Index alphabet: token at position `d` stands for digit `d` (base 16).
const INDEX_ALPHABET: [&str; 16] = [
    "[C]",
    "[Ring1]",
    "[Ring2]",
    "[Branch1]",
    "[=Branch1]",
    "[#Branch1]",
    "[Branch2]",
    "[=Branch2]",
    "[#Branch2]",
    "[O]",
    "[N]",
    "[=N]",
    "[=C]",
    "[#C]",
    "[S]",
    "[P]",
];

/// The sixteen index symbols in digit order.
pub fn index_alphabet() -> Vec<SelfiesToken> {
    INDEX_ALPHABET.iter().map(|t| t.parse().unwrap()).collect()
}

pub(crate) fn index_token(digit: u16) -> SelfiesToken {
    INDEX_ALPHABET[digit as usize].parse().unwrap()
}

impl SelfiesToken {
    pub fn atom(bond: u8, atom: AtomSymbol) -> SelfiesToken {
        SelfiesToken::Atom { bond, atom }
    }

    /// Digit read when the token sits in an index position. Tokens outside
    /// the index alphabet read as zero so every string stays decodable.
    pub fn index_value(&self) -> u16 {
        use SelfiesToken::*;
        match *self {
            Atom { bond, atom } if atom.is_plain() => match (bond, atom.element) {
                (1, Element::C) => 0,
                (1, Element::O) => 9,
                (1, Element::N) => 10,
                (2, Element::N) => 11,
                (2, Element::C) => 12,
                (3, Element::C) => 13,
                (1, Element::S) => 14,
                (1, Element::P) => 15,
                _ => 0,
            },
            Ring { bond: 1, size } if size <= 2 => size as u16,
            Branch { bond, size: 1 } => 2 + bond as u16,
            Branch { bond, size: 2 } => 5 + bond as u16,
            _ => 0,
        }
    }
}

fn prefix(bond: u8) -> &'static str {
    match bond {
        2 => "=",
        3 => "#",
        _ => "",
    }
}

impl fmt::Display for SelfiesToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            SelfiesToken::Nop => f.write_str("[nop]"),
            SelfiesToken::Dot => f.write_str("[.]"),
            SelfiesToken::Branch { bond, size } => write!(f, "[{}Branch{size}]", prefix(bond)),
            SelfiesToken::Ring { bond, size } => write!(f, "[{}Ring{size}]", prefix(bond)),
            SelfiesToken::Atom { bond, atom } => {
                write!(f, "[{}", prefix(bond))?;
                if let Some(iso) = atom.isotope {
                    write!(f, "{iso}")?;
                }
                f.write_str(atom.element.symbol())?;
                if let Some(h) = atom.hydrogens {
                    // H0 keeps an otherwise undecorated bracket atom distinct
                    // from the plain form.
                    if h > 0 || (atom.charge == 0 && atom.isotope.is_none()) {
                        write!(f, "H{h}")?;
                    }
                }
                if atom.charge != 0 {
                    write!(f, "{:+}", atom.charge)?;
                }
                f.write_str("]")
            }
        }
    }
}

fn bad(token: &str) -> SelfiesError {
    SelfiesError::UnknownToken {
        offset: 0,
        token: token.to_string(),
    }
}

fn digits(s: &str) -> (&str, &str) {
    let end = s.find(|c: char| !c.is_ascii_digit()).unwrap_or(s.len());
    s.split_at(end)
}

impl FromStr for SelfiesToken {
    type Err = SelfiesError;

    fn from_str(text: &str) -> Result<SelfiesToken, SelfiesError> {
        let inner = text
            .strip_prefix('[')
            .and_then(|t| t.strip_suffix(']'))
            .ok_or_else(|| bad(text))?;
        match inner {
            "nop" => return Ok(SelfiesToken::Nop),
            "." => return Ok(SelfiesToken::Dot),
            _ => {}
        }
        let (bond, rest) = match inner.as_bytes().first() {
            Some(b'=') => (2, &inner[1..]),
            Some(b'#') => (3, &inner[1..]),
            _ => (1, inner),
        };
        for (word, ring) in [("Branch", false), ("Ring", true)] {
            if let Some(n) = rest.strip_prefix(word) {
                let size = match n {
                    "1" => 1,
                    "2" => 2,
                    "3" => 3,
                    _ => return Err(bad(text)),
                };
                return Ok(if ring {
                    SelfiesToken::Ring { bond, size }
                } else {
                    SelfiesToken::Branch { bond, size }
                });
            }
        }

        let (iso, rest) = digits(rest);
        let isotope = match iso {
            "" => None,
            d => Some(
                d.parse::<u16>()
                    .ok()
                    .filter(|&v| v > 0)
                    .ok_or_else(|| bad(text))?,
            ),
        };
        let two = rest.get(..2).and_then(Element::from_symbol);
        let (element, mut rest) = match two {
            Some(e) => (e, &rest[2..]),
            None => {
                let e = rest
                    .get(..1)
                    .and_then(Element::from_symbol)
                    .ok_or_else(|| bad(text))?;
                (e, &rest[1..])
            }
        };
        let mut hydrogens = None;
        if let Some(r) = rest.strip_prefix('H') {
            let (d, r) = digits(r);
            hydrogens = Some(if d.is_empty() {
                1
            } else {
                d.parse().map_err(|_| bad(text))?
            });
            rest = r;
        }
        let mut charge = 0i8;
        if let Some(sign) = rest.chars().next().filter(|c| *c == '+' || *c == '-') {
            let (d, r) = digits(&rest[1..]);
            let mag: i8 = if d.is_empty() {
                1
            } else {
                d.parse().map_err(|_| bad(text))?
            };
            if mag > 8 {
                return Err(bad(text));
            }
            charge = if sign == '+' { mag } else { -mag };
            rest = r;
        }
        if !rest.is_empty() {
            return Err(bad(text));
        }
        if hydrogens.is_none() && (charge != 0 || isotope.is_some()) {
            hydrogens = Some(0);
        }
        Ok(SelfiesToken::Atom {
            bond,
            atom: AtomSymbol {
                element,
                charge,
                hydrogens,
                isotope,
            },
        })
    }
}

/// Splits a SELFIES string into bracketed units.
pub fn split_tokens(text: &str) -> Result<Vec<&str>, SelfiesError> {
    let mut out = Vec::new();
    let mut open = None;
    for (i, c) in text.char_indices() {
        match (c, open) {
            ('[', None) => open = Some(i),
            (']', Some(s)) => {
                out.push(&text[s..=i]);
                open = None;
            }
            (_, Some(_)) if c != '[' => {}
            _ => return Err(SelfiesError::UnbalancedBracket { offset: i }),
        }
    }
    match open {
        Some(s) => Err(SelfiesError::UnbalancedBracket { offset: s }),
        None => Ok(out),
    }
}

/// Parses a SELFIES string into tokens; error offsets are byte positions.
pub fn parse_tokens(text: &str) -> Result<Vec<SelfiesToken>, SelfiesError> {
    let mut offset = 0;
    let mut out = Vec::new();
    for unit in split_tokens(text)? {
        offset = text[offset..].find(unit).map_or(offset, |p| p + offset);
        out.push(unit.parse().map_err(|_| SelfiesError::UnknownToken {
            offset,
            token: unit.to_string(),
        })?);
        offset += unit.len();
    }
    Ok(out)
}
