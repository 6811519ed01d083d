//! Stopword lists and the punctuation predicate.

use std::collections::HashSet;
use std::io::BufRead;

use unicode_general_category::get_general_category;

use crate::error::Result;
use crate::model::Language;

const EN: &str = include_str!("../data/stopwords_en.txt");
const ZH: &str = include_str!("../data/stopwords_zh.txt");

/// True when every character of `token` is in a Unicode punctuation (P*) category.
pub fn is_punct(token: &str) -> bool {
    !token.is_empty()
        && token
            .chars()
            .all(|c| get_general_category(c).abbreviation().starts_with('P'))
}

/// Case-insensitive stopword set; one word per line, `#` starts a comment.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Stopwords(HashSet<String>);

impl Stopwords {
    pub fn builtin(language: Language) -> Self {
        Self::parse(match language {
            Language::En => EN,
            Language::Zh => ZH,
        })
    }

    fn parse(text: &str) -> Self {
        Stopwords(
            text.lines()
                .map(|l| l.split('#').next().unwrap_or("").trim())
                .filter(|l| !l.is_empty())
                .map(str::to_lowercase)
                .collect(),
        )
    }

    pub fn from_reader<R: BufRead>(mut reader: R) -> Result<Self> {
        let mut text = String::new();
        reader.read_to_string(&mut text)?;
        Ok(Self::parse(&text))
    }

    pub fn from_words<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Stopwords(words.into_iter().map(|w| w.as_ref().to_lowercase()).collect())
    }

    pub fn contains(&self, token: &str) -> bool {
        self.0.contains(&token.to_lowercase())
    }

    /// Neither a stopword nor punctuation.
    pub fn is_content(&self, token: &str) -> bool {
        !is_punct(token) && !self.contains(token)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}
