//! The two-command rich-text grammar used in descriptions.
//!
//! `\cite{KEY}` and `\media{ID}` with an argument drawn from `[A-Za-z0-9_:-]+`
//! are recognized; everything else, including LaTeX math and malformed
//! commands, is literal text.

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TokenKind {
    Text,
    Cite,
    Media,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RichTextToken {
    pub kind: TokenKind,
    /// Literal text for `Text`, the command argument otherwise.
    pub payload: String,
}

impl RichTextToken {
    pub fn text(s: impl Into<String>) -> Self {
        Self { kind: TokenKind::Text, payload: s.into() }
    }

    pub fn cite(s: impl Into<String>) -> Self {
        Self { kind: TokenKind::Cite, payload: s.into() }
    }

    pub fn media(s: impl Into<String>) -> Self {
        Self { kind: TokenKind::Media, payload: s.into() }
    }

    /// The exact source text this token was read from.
    pub fn write_to(&self, out: &mut String) {
        match self.kind {
            TokenKind::Text => out.push_str(&self.payload),
            TokenKind::Cite => {
                out.push_str("\\cite{");
                out.push_str(&self.payload);
                out.push('}');
            }
            TokenKind::Media => {
                out.push_str("\\media{");
                out.push_str(&self.payload);
                out.push('}');
            }
        }
    }
}

pub fn is_ident_char(b: u8) -> bool {
    b.is_ascii_alphanumeric() || matches!(b, b'_' | b':' | b'-')
}

/// `[A-Za-z0-9_:-]+`, the charset shared by citation keys and media ids.
pub fn is_ident(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(is_ident_char)
}

const COMMANDS: [(&str, TokenKind); 2] = [("\\cite{", TokenKind::Cite), ("\\media{", TokenKind::Media)];

/// Try to read a command at the start of `rest`; returns the token and the
/// number of bytes consumed.
fn command_at(rest: &str) -> Option<(TokenKind, &str, usize)> {
    for (prefix, kind) in COMMANDS {
        let Some(after) = rest.strip_prefix(prefix) else { continue };
        let arg_len = after.bytes().take_while(|&b| is_ident_char(b)).count();
        if arg_len > 0 && after.as_bytes().get(arg_len) == Some(&b'}') {
            return Some((kind, &after[..arg_len], prefix.len() + arg_len + 1));
        }
    }
    None
}

pub fn parse_rich_text(text: &str) -> Vec<RichTextToken> {
    let mut tokens = Vec::new();
    let mut literal_start = 0;
    let mut i = 0;
    while let Some(off) = text[i..].find('\\') {
        let at = i + off;
        match command_at(&text[at..]) {
            Some((kind, arg, consumed)) => {
                if literal_start < at {
                    tokens.push(RichTextToken::text(&text[literal_start..at]));
                }
                tokens.push(RichTextToken { kind, payload: arg.to_owned() });
                i = at + consumed;
                literal_start = i;
            }
            None => i = at + 1,
        }
    }
    if literal_start < text.len() {
        tokens.push(RichTextToken::text(&text[literal_start..]));
    }
    tokens
}

pub fn serialize_rich_text(tokens: &[RichTextToken]) -> String {
    let mut out = String::new();
    for t in tokens {
        t.write_to(&mut out);
    }
    out
}

/// Keys cited with `\cite{..}`, in order of appearance.
pub fn cited_keys(text: &str) -> impl Iterator<Item = String> {
    parse_rich_text(text)
        .into_iter()
        .filter(|t| t.kind == TokenKind::Cite)
        .map(|t| t.payload)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_input_has_no_tokens() {
        assert!(parse_rich_text("").is_empty());
    }

    #[test]
    fn recognizes_both_commands() {
        assert_eq!(
            parse_rich_text("See \\cite{BHKS15} and \\media{cat1}."),
            vec![
                RichTextToken::text("See "),
                RichTextToken::cite("BHKS15"),
                RichTextToken::text(" and "),
                RichTextToken::media("cat1"),
                RichTextToken::text("."),
            ]
        );
    }

    #[test]
    fn bad_argument_is_literal() {
        assert_eq!(parse_rich_text("\\cite{bad key}"), vec![RichTextToken::text("\\cite{bad key}")]);
        assert_eq!(parse_rich_text("\\cite{}"), vec![RichTextToken::text("\\cite{}")]);
        assert_eq!(parse_rich_text("\\cite{abc"), vec![RichTextToken::text("\\cite{abc")]);
        assert_eq!(parse_rich_text("\\citex{a}"), vec![RichTextToken::text("\\citex{a}")]);
    }

    #[test]
    fn math_and_backslashes_pass_through() {
        let s = "$z \\mapsto z^a$ \\\\cite{a}";
        let toks = parse_rich_text(s);
        assert_eq!(toks[0], RichTextToken::text("$z \\mapsto z^a$ \\"));
        assert_eq!(toks[1], RichTextToken::cite("a"));
        assert_eq!(serialize_rich_text(&toks), s);
    }

    #[test]
    fn adjacent_commands_and_multibyte_text() {
        let toks = parse_rich_text("Möbius\\cite{a:b}\\media{x-1}ü");
        assert_eq!(
            toks,
            vec![
                RichTextToken::text("Möbius"),
                RichTextToken::cite("a:b"),
                RichTextToken::media("x-1"),
                RichTextToken::text("ü"),
            ]
        );
    }
}
