use std::io::{BufRead, Write};
use std::sync::Arc;

use crate::arith::{parse_natural, Natural};
use crate::error::{param, Error, Result};
use crate::set::SetDescriptor;

/// Materialised initial segment `a₁ < a₂ < … < a_N` of a set.
#[derive(Clone, Debug, PartialEq)]
pub struct Prefix {
    elements: Vec<Natural>,
    source: Option<Arc<SetDescriptor>>,
}

impl Prefix {
    /// Fails unless `elements` is strictly increasing and positive.
    pub fn new(elements: Vec<Natural>) -> Result<Self> {
        if elements.first().is_some_and(|a| a == &Natural::default()) {
            return Err(param("elements", "set elements are positive"));
        }
        if let Some(i) = elements.windows(2).position(|w| w[0] >= w[1]) {
            return Err(param("elements", format!("not strictly increasing at position {}", i + 2)));
        }
        Ok(Prefix { elements, source: None })
    }

    pub(crate) fn with_source(elements: Vec<Natural>, source: SetDescriptor) -> Self {
        Prefix { elements, source: Some(Arc::new(source)) }
    }

    pub fn elements(&self) -> &[Natural] {
        &self.elements
    }

    pub fn source(&self) -> Option<&SetDescriptor> {
        self.source.as_deref()
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// `a_n`, 1-based.
    pub fn get(&self, n: usize) -> Result<&Natural> {
        if n == 0 || n > self.len() {
            return Err(Error::Index { index: n, len: self.len() });
        }
        Ok(&self.elements[n - 1])
    }

    pub fn truncate(&self, n: usize) -> Prefix {
        Prefix { elements: self.elements[..n.min(self.len())].to_vec(), source: self.source.clone() }
    }

    /// One JSON string per line.
    pub fn write_json_lines<W: Write>(&self, mut w: W) -> Result<()> {
        for a in &self.elements {
            writeln!(w, "\"{a}\"")?;
        }
        Ok(())
    }

    pub fn read_json_lines<R: BufRead>(r: R) -> Result<Self> {
        let mut elements = Vec::new();
        for line in r.lines() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let s: String = serde_json::from_str(line)?;
            elements.push(parse_natural(&s)?);
        }
        Prefix::new(elements)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::nat;

    #[test]
    fn json_lines_round_trip() {
        let p = Prefix::new(vec![nat(1), nat(4), nat(9)]).unwrap();
        let mut buf = Vec::new();
        p.write_json_lines(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "\"1\"\n\"4\"\n\"9\"\n");
        assert_eq!(Prefix::read_json_lines(&buf[..]).unwrap(), p);
    }

    #[test]
    fn rejects_unsorted() {
        assert!(Prefix::new(vec![nat(2), nat(2)]).is_err());
        assert!(Prefix::new(vec![nat(0), nat(2)]).is_err());
        let p = Prefix::new(vec![nat(2), nat(3)]).unwrap();
        assert!(p.get(0).is_err());
        assert_eq!(p.get(2).unwrap(), &nat(3));
    }
}
