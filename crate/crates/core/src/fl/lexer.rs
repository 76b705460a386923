use super::FlError;

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    /// Unprefixed identifier; keywords are recognized by the parser.
    Ident(String),
    /// `src#name`
    Prefixed(String, String),
    /// `src#"text"`
    PrefixedStr(String, String),
    /// `src#` followed by something that is not a name (as in `p# if ...`).
    SourcePrefix(String),
    Str(String),
    Number(String),
    Range(u32, Option<u32>),
    /// Percentage in hundredths.
    Percent(u32),
    Var(String),
    Colon,
    Comma,
    Semi,
    LParen,
    RParen,
    MetaOpen,
    RBracket,
    Backquote,
    RightQuote,
}

#[derive(Debug, Clone)]
pub struct Token {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
}

struct Cursor<'a> {
    chars: std::iter::Peekable<std::str::CharIndices<'a>>,
    src: &'a str,
    line: usize,
    col: usize,
}

impl<'a> Cursor<'a> {
    fn peek(&mut self) -> Option<char> {
        self.chars.peek().map(|&(_, c)| c)
    }

    fn peek2(&self) -> Option<char> {
        let mut it = self.chars.clone();
        it.next();
        it.next().map(|(_, c)| c)
    }

    fn bump(&mut self) -> Option<char> {
        let (_, c) = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn offset(&mut self) -> usize {
        self.chars.peek().map(|&(i, _)| i).unwrap_or(self.src.len())
    }
}

fn is_ident_start(c: char) -> bool {
    c.is_alphabetic() || c == '_'
}

fn is_ident_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

pub fn tokenize(src: &str) -> Result<Vec<Token>, FlError> {
    let mut cur = Cursor {
        chars: src.char_indices().peekable(),
        src,
        line: 1,
        col: 1,
    };
    let mut out = Vec::new();
    while let Some(c) = cur.peek() {
        if c.is_whitespace() {
            cur.bump();
            continue;
        }
        if c == '/' && cur.peek2() == Some('/') {
            while let Some(c) = cur.peek() {
                if c == '\n' {
                    break;
                }
                cur.bump();
            }
            continue;
        }
        let (line, col) = (cur.line, cur.col);
        let push = |out: &mut Vec<Token>, tok| out.push(Token { tok, line, col });
        match c {
            ':' | ',' | ';' | '(' | ')' | ']' | '`' | '\'' => {
                cur.bump();
                let tok = match c {
                    ':' => Tok::Colon,
                    ',' => Tok::Comma,
                    ';' => Tok::Semi,
                    '(' => Tok::LParen,
                    ')' => Tok::RParen,
                    ']' => Tok::RBracket,
                    '`' => Tok::Backquote,
                    _ => Tok::RightQuote,
                };
                push(&mut out, tok);
            }
            '"' => {
                let s = lex_string(&mut cur)?;
                push(&mut out, Tok::Str(s));
            }
            '?' => {
                cur.bump();
                let name = lex_ident(&mut cur);
                if name.is_empty() {
                    return Err(FlError::syntax(line, col, "variable name after '?'"));
                }
                push(&mut out, Tok::Var(name));
            }
            '_' if cur.peek2() == Some('_') => {
                cur.bump();
                cur.bump();
                if cur.peek() != Some('[') {
                    return Err(FlError::syntax(line, col, "'[' after '__'"));
                }
                cur.bump();
                push(&mut out, Tok::MetaOpen);
            }
            c if c.is_ascii_digit() => {
                let tok = lex_number(&mut cur, line, col)?;
                push(&mut out, tok);
            }
            c if is_ident_start(c) => {
                let name = lex_ident(&mut cur);
                if cur.peek() == Some('#') {
                    cur.bump();
                    match cur.peek() {
                        Some('"') => {
                            let s = lex_string(&mut cur)?;
                            push(&mut out, Tok::PrefixedStr(name, s));
                        }
                        Some(c) if is_ident_start(c) => {
                            let local = lex_ident(&mut cur);
                            push(&mut out, Tok::Prefixed(name, local));
                        }
                        _ => push(&mut out, Tok::SourcePrefix(name)),
                    }
                } else {
                    push(&mut out, Tok::Ident(name));
                }
            }
            other => {
                return Err(FlError::syntax(
                    line,
                    col,
                    format!("a token (found unexpected character {other:?})"),
                ))
            }
        }
    }
    Ok(out)
}

fn lex_ident(cur: &mut Cursor<'_>) -> String {
    let start = cur.offset();
    while matches!(cur.peek(), Some(c) if is_ident_char(c)) {
        cur.bump();
    }
    let end = cur.offset();
    cur.src[start..end].to_string()
}

fn lex_string(cur: &mut Cursor<'_>) -> Result<String, FlError> {
    let (line, col) = (cur.line, cur.col);
    cur.bump();
    let mut s = String::new();
    loop {
        match cur.bump() {
            None => return Err(FlError::syntax(line, col, "closing '\"' of string")),
            Some('"') => return Ok(s),
            Some('\\') => match cur.bump() {
                Some(c) => s.push(c),
                None => return Err(FlError::syntax(line, col, "closing '\"' of string")),
            },
            Some(c) => s.push(c),
        }
    }
}

fn lex_digits(cur: &mut Cursor<'_>) -> String {
    let start = cur.offset();
    while matches!(cur.peek(), Some(c) if c.is_ascii_digit()) {
        cur.bump();
    }
    let end = cur.offset();
    cur.src[start..end].to_string()
}

fn parse_u32(text: &str, line: usize, col: usize) -> Result<u32, FlError> {
    text.parse()
        .map_err(|_| FlError::syntax(line, col, "a number that fits in 32 bits"))
}

fn lex_number(cur: &mut Cursor<'_>, line: usize, col: usize) -> Result<Tok, FlError> {
    let int = lex_digits(cur);
    let mut text = int.clone();
    if cur.peek() == Some('.') {
        match cur.peek2() {
            Some('*') => {
                cur.bump();
                cur.bump();
                return Ok(Tok::Range(parse_u32(&int, line, col)?, None));
            }
            Some('.') => {
                cur.bump();
                cur.bump();
                let min = parse_u32(&int, line, col)?;
                if cur.peek() == Some('*') {
                    cur.bump();
                    return Ok(Tok::Range(min, None));
                }
                let max = lex_digits(cur);
                if max.is_empty() {
                    return Err(FlError::syntax(cur.line, cur.col, "upper bound or '*' after '..'"));
                }
                let max = parse_u32(&max, line, col)?;
                if max < min {
                    return Err(FlError::syntax(line, col, "a range with min <= max"));
                }
                return Ok(Tok::Range(min, Some(max)));
            }
            Some(c) if c.is_ascii_digit() => {
                cur.bump();
                text.push('.');
                text.push_str(&lex_digits(cur));
            }
            _ => {}
        }
    }
    if cur.peek() == Some('%') {
        cur.bump();
        let hundredths = percent_hundredths(&text)
            .ok_or_else(|| FlError::syntax(line, col, "a percentage between 0 and 100"))?;
        return Ok(Tok::Percent(hundredths));
    }
    Ok(Tok::Number(text))
}

fn percent_hundredths(text: &str) -> Option<u32> {
    let (int, frac) = match text.split_once('.') {
        Some((i, f)) => (i, f),
        None => (text, ""),
    };
    if frac.len() > 2 {
        return None;
    }
    let mut frac = frac.to_string();
    while frac.len() < 2 {
        frac.push('0');
    }
    let v = int.parse::<u32>().ok()?.checked_mul(100)? + frac.parse::<u32>().ok()?;
    (v <= 10_000).then_some(v)
}
