use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

use super::Name;

/// Answers class-hierarchy queries for effect canonicalization and
/// subsumption.
pub trait Hierarchy {
    /// `sub ≤ sup` in the nominal class order (reflexive).
    fn is_subclass(&self, sub: &str, sup: &str) -> bool;
}

/// A hierarchy that only relates a class to itself. Used before a class
/// table exists, e.g. while parsing.
pub struct Flat;

impl Hierarchy for Flat {
    fn is_subclass(&self, sub: &str, sup: &str) -> bool {
        sub == sup
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EffectAtom {
    Star,
    ClassStar(Name),
    Region(Name, Name),
    SelfStar,
    SelfRegion(Name),
}

impl EffectAtom {
    pub fn is_self(&self) -> bool {
        matches!(self, EffectAtom::SelfStar | EffectAtom::SelfRegion(_))
    }

    /// `self ⊆ other` for single atoms.
    pub fn subsumed_by(&self, other: &EffectAtom, h: &dyn Hierarchy) -> bool {
        use EffectAtom::*;
        match (self, other) {
            (_, Star) => true,
            (Star, _) => false,
            (Region(c1, r1), Region(c2, r2)) => r1 == r2 && h.is_subclass(c1, c2),
            (Region(c1, _), ClassStar(c2)) | (ClassStar(c1), ClassStar(c2)) => {
                h.is_subclass(c1, c2)
            }
            (SelfRegion(r1), SelfRegion(r2)) => r1 == r2,
            (SelfRegion(_), SelfStar) | (SelfStar, SelfStar) => true,
            _ => false,
        }
    }

    /// Lower is coarser: `*` < `C.*` < `C.r`.
    fn specificity(&self) -> u8 {
        match self {
            EffectAtom::Star => 0,
            EffectAtom::ClassStar(_) | EffectAtom::SelfStar => 1,
            EffectAtom::Region(..) | EffectAtom::SelfRegion(_) => 2,
        }
    }
}

impl fmt::Display for EffectAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EffectAtom::Star => write!(f, "*"),
            EffectAtom::ClassStar(c) => write!(f, "{c}"),
            EffectAtom::Region(c, r) => write!(f, "{c}.{r}"),
            EffectAtom::SelfStar => write!(f, "self"),
            EffectAtom::SelfRegion(r) => write!(f, "self.{r}"),
        }
    }
}

/// A canonical set of effect atoms. The empty set is the pure effect.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Effect {
    atoms: BTreeSet<EffectAtom>,
}

impl Effect {
    pub fn pure() -> Effect {
        Effect::default()
    }

    pub fn star() -> Effect {
        Effect::canonical([EffectAtom::Star], &Flat)
    }

    pub fn class_star(class: &str) -> Effect {
        Effect::canonical([EffectAtom::ClassStar(class.into())], &Flat)
    }

    pub fn region(class: &str, region: &str) -> Effect {
        Effect::canonical([EffectAtom::Region(class.into(), region.into())], &Flat)
    }

    pub fn self_star() -> Effect {
        Effect::canonical([EffectAtom::SelfStar], &Flat)
    }

    pub fn self_region(region: &str) -> Effect {
        Effect::canonical([EffectAtom::SelfRegion(region.into())], &Flat)
    }

    /// Builds the canonical form: `*` absorbs everything, and any atom
    /// subsumed by a different atom of the set is dropped.
    pub fn canonical<I: IntoIterator<Item = EffectAtom>>(atoms: I, h: &dyn Hierarchy) -> Effect {
        let atoms: BTreeSet<EffectAtom> = atoms.into_iter().collect();
        if atoms.contains(&EffectAtom::Star) {
            return Effect {
                atoms: [EffectAtom::Star].into_iter().collect(),
            };
        }
        let kept = atoms
            .iter()
            .filter(|a| {
                !atoms.iter().any(|b| {
                    b != *a && a.subsumed_by(b, h) && !(b.subsumed_by(a, h) && b < *a)
                })
            })
            .cloned()
            .collect();
        Effect { atoms: kept }
    }

    pub fn atoms(&self) -> impl Iterator<Item = &EffectAtom> {
        self.atoms.iter()
    }

    pub fn is_pure(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn has_self(&self) -> bool {
        self.atoms.iter().any(EffectAtom::is_self)
    }

    pub fn union(&self, other: &Effect, h: &dyn Hierarchy) -> Effect {
        Effect::canonical(self.atoms.iter().chain(other.atoms.iter()).cloned(), h)
    }

    /// `self ⊆ other`: every atom here is subsumed by some atom there.
    pub fn subsumed_by(&self, other: &Effect, h: &dyn Hierarchy) -> bool {
        self.atoms
            .iter()
            .all(|a| other.atoms.iter().any(|b| a.subsumed_by(b, h)))
    }

    /// Replaces `self` atoms with atoms on the receiver's class.
    pub fn resolve_self(&self, receiver_class: &Name, h: &dyn Hierarchy) -> Effect {
        Effect::canonical(
            self.atoms.iter().map(|a| match a {
                EffectAtom::SelfStar => EffectAtom::ClassStar(receiver_class.clone()),
                EffectAtom::SelfRegion(r) => EffectAtom::Region(receiver_class.clone(), r.clone()),
                other => other.clone(),
            }),
            h,
        )
    }

    /// Coarsens the effect to the given precision level.
    pub fn erase(&self, precision: Precision, h: &dyn Hierarchy) -> Effect {
        match precision {
            Precision::Precise => self.clone(),
            Precision::Class => Effect::canonical(
                self.atoms.iter().map(|a| match a {
                    EffectAtom::Region(c, _) => EffectAtom::ClassStar(c.clone()),
                    EffectAtom::SelfRegion(_) => EffectAtom::SelfStar,
                    other => other.clone(),
                }),
                h,
            ),
            Precision::Purity if self.is_pure() => Effect::pure(),
            Precision::Purity => Effect::star(),
        }
    }

    /// Pure effects rank above every region; otherwise the coarsest atom
    /// decides.
    pub fn specificity(&self) -> u8 {
        self.atoms
            .iter()
            .map(EffectAtom::specificity)
            .min()
            .unwrap_or(3)
    }
}

impl fmt::Display for Effect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let atoms: Vec<_> = self.atoms.iter().collect();
        match atoms.as_slice() {
            [] => write!(f, "pure"),
            [one] => write!(f, "{one}"),
            many => {
                write!(f, "(u")?;
                for a in many {
                    write!(f, " {a}")?;
                }
                write!(f, ")")
            }
        }
    }
}

impl Serialize for Effect {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// Effect annotation precision, from exact regions down to pure/impure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Precision {
    #[default]
    Precise,
    Class,
    Purity,
}

impl fmt::Display for Precision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Precision::Precise => "precise",
            Precision::Class => "class",
            Precision::Purity => "purity",
        })
    }
}

impl std::str::FromStr for Precision {
    type Err = String;

    fn from_str(s: &str) -> Result<Precision, String> {
        match s {
            "precise" => Ok(Precision::Precise),
            "class" => Ok(Precision::Class),
            "purity" => Ok(Precision::Purity),
            _ => Err(format!("unknown precision `{s}` (expected precise, class, purity)")),
        }
    }
}

/// Read and write effects of a method or an evaluation.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct EffectPair {
    pub read: Effect,
    pub write: Effect,
}

impl EffectPair {
    pub fn new(read: Effect, write: Effect) -> EffectPair {
        EffectPair { read, write }
    }

    pub fn pure() -> EffectPair {
        EffectPair::default()
    }

    pub fn union(&self, other: &EffectPair, h: &dyn Hierarchy) -> EffectPair {
        EffectPair {
            read: self.read.union(&other.read, h),
            write: self.write.union(&other.write, h),
        }
    }

    pub fn resolve_self(&self, receiver_class: &Name, h: &dyn Hierarchy) -> EffectPair {
        EffectPair {
            read: self.read.resolve_self(receiver_class, h),
            write: self.write.resolve_self(receiver_class, h),
        }
    }

    pub fn erase(&self, precision: Precision, h: &dyn Hierarchy) -> EffectPair {
        EffectPair {
            read: self.read.erase(precision, h),
            write: self.write.erase(precision, h),
        }
    }
}

impl fmt::Display for EffectPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{} | {}>", self.read, self.write)
    }
}
