//! Tokenizer shared by the N3 and SPARQL-subset parsers.

use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    IriRef(String),
    PName {
        prefix: String,
        local: String,
    },
    Blank(String),
    Var(String),
    Str(String),
    Integer(String),
    Decimal(String),
    Double(String),
    /// `@word`: a directive or a language tag, depending on context.
    At(String),
    /// A bare identifier such as `a`, `true`, `CONSTRUCT`.
    Word(String),
    LBrace,
    RBrace,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Dot,
    Semi,
    Comma,
    Caret2,
    Implies,
    ImpliedBy,
    Equals,
    Bang,
    Caret,
    Slash,
    Pipe,
    Star,
    Plus,
    Question,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::IriRef(i) => write!(f, "<{i}>"),
            Tok::PName { prefix, local } => write!(f, "{prefix}:{local}"),
            Tok::Blank(b) => write!(f, "_:{b}"),
            Tok::Var(v) => write!(f, "?{v}"),
            Tok::Str(s) => write!(f, "\"{s}\""),
            Tok::Integer(n) | Tok::Decimal(n) | Tok::Double(n) => f.write_str(n),
            Tok::At(w) => write!(f, "@{w}"),
            Tok::Word(w) => f.write_str(w),
            Tok::LBrace => f.write_str("{"),
            Tok::RBrace => f.write_str("}"),
            Tok::LParen => f.write_str("("),
            Tok::RParen => f.write_str(")"),
            Tok::LBracket => f.write_str("["),
            Tok::RBracket => f.write_str("]"),
            Tok::Dot => f.write_str("."),
            Tok::Semi => f.write_str(";"),
            Tok::Comma => f.write_str(","),
            Tok::Caret2 => f.write_str("^^"),
            Tok::Implies => f.write_str("=>"),
            Tok::ImpliedBy => f.write_str("<="),
            Tok::Equals => f.write_str("="),
            Tok::Bang => f.write_str("!"),
            Tok::Caret => f.write_str("^"),
            Tok::Slash => f.write_str("/"),
            Tok::Pipe => f.write_str("|"),
            Tok::Star => f.write_str("*"),
            Tok::Plus => f.write_str("+"),
            Tok::Question => f.write_str("?"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexError {
    pub pos: Pos,
    pub message: String,
}

pub fn tokenize(text: &str) -> Result<Vec<Token>, LexError> {
    Lexer::new(text).run()
}

struct Lexer<'a> {
    chars: Vec<char>,
    idx: usize,
    line: usize,
    col: usize,
    _src: &'a str,
}

fn is_name_start(c: char) -> bool {
    c.is_alphabetic() || c == '_'
}

fn is_name_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '-'
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Self {
            chars: src.chars().collect(),
            idx: 0,
            line: 1,
            col: 1,
            _src: src,
        }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.idx).copied()
    }

    fn peek_at(&self, offset: usize) -> Option<char> {
        self.chars.get(self.idx + offset).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.get(self.idx).copied()?;
        self.idx += 1;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn pos(&self) -> Pos {
        Pos {
            line: self.line,
            col: self.col,
        }
    }

    fn err(&self, pos: Pos, message: impl Into<String>) -> LexError {
        LexError {
            pos,
            message: message.into(),
        }
    }

    fn run(mut self) -> Result<Vec<Token>, LexError> {
        let mut out = Vec::new();
        loop {
            self.skip_trivia();
            let pos = self.pos();
            let Some(c) = self.peek() else {
                out.push(Token { tok: Tok::Eof, pos });
                return Ok(out);
            };
            let tok = match c {
                '<' => {
                    if self.peek_at(1) == Some('=') {
                        self.bump();
                        self.bump();
                        Tok::ImpliedBy
                    } else {
                        self.iri_ref(pos)?
                    }
                }
                '"' | '\'' => Tok::Str(self.string(pos)?),
                '{' => self.single(Tok::LBrace),
                '}' => self.single(Tok::RBrace),
                '(' => self.single(Tok::LParen),
                ')' => self.single(Tok::RParen),
                '[' => self.single(Tok::LBracket),
                ']' => self.single(Tok::RBracket),
                '.' => self.single(Tok::Dot),
                ';' => self.single(Tok::Semi),
                ',' => self.single(Tok::Comma),
                '!' => self.single(Tok::Bang),
                '/' => self.single(Tok::Slash),
                '|' => self.single(Tok::Pipe),
                '*' => self.single(Tok::Star),
                '^' => {
                    if self.peek_at(1) == Some('^') {
                        self.bump();
                        self.bump();
                        Tok::Caret2
                    } else {
                        self.single(Tok::Caret)
                    }
                }
                '=' => {
                    if self.peek_at(1) == Some('>') {
                        self.bump();
                        self.bump();
                        Tok::Implies
                    } else {
                        self.single(Tok::Equals)
                    }
                }
                '@' => {
                    self.bump();
                    let word = self.take_while(|c| c.is_alphanumeric() || c == '-');
                    if word.is_empty() {
                        return Err(self.err(pos, "expected a keyword after '@'"));
                    }
                    Tok::At(word)
                }
                '?' | '$' => {
                    self.bump();
                    let name = self.take_while(|c| c.is_alphanumeric() || c == '_');
                    if name.is_empty() {
                        if c == '?' {
                            Tok::Question
                        } else {
                            return Err(self.err(pos, "expected a variable name after '$'"));
                        }
                    } else {
                        Tok::Var(name)
                    }
                }
                '+' | '-' if self.peek_at(1).is_some_and(|d| d.is_ascii_digit()) => self.number(),
                '+' => self.single(Tok::Plus),
                c if c.is_ascii_digit() => self.number(),
                '_' if self.peek_at(1) == Some(':') => {
                    self.bump();
                    self.bump();
                    let label = self.local_name();
                    if label.is_empty() {
                        return Err(self.err(pos, "empty blank node label"));
                    }
                    Tok::Blank(label)
                }
                ':' => {
                    self.bump();
                    Tok::PName {
                        prefix: String::new(),
                        local: self.local_name(),
                    }
                }
                c if is_name_start(c) => {
                    let word = self.take_while(|c| is_name_char(c) || c == '.');
                    // a trailing '.' ends the statement rather than the name
                    let word = self.give_back_dots(word);
                    if self.peek() == Some(':') {
                        self.bump();
                        Tok::PName {
                            prefix: word,
                            local: self.local_name(),
                        }
                    } else {
                        Tok::Word(word)
                    }
                }
                other => return Err(self.err(pos, format!("unexpected character '{other}'"))),
            };
            out.push(Token { tok, pos });
        }
    }

    fn single(&mut self, tok: Tok) -> Tok {
        self.bump();
        tok
    }

    fn skip_trivia(&mut self) {
        while let Some(c) = self.peek() {
            if c.is_whitespace() {
                self.bump();
            } else if c == '#' {
                while let Some(c) = self.peek() {
                    if c == '\n' {
                        break;
                    }
                    self.bump();
                }
            } else {
                break;
            }
        }
    }

    fn take_while(&mut self, pred: impl Fn(char) -> bool) -> String {
        let mut s = String::new();
        while let Some(c) = self.peek() {
            if !pred(c) {
                break;
            }
            s.push(c);
            self.bump();
        }
        s
    }

    /// Un-consumes trailing dots so `ex:a.` lexes as a name followed by `.`.
    fn give_back_dots(&mut self, mut word: String) -> String {
        while word.ends_with('.') {
            word.pop();
            self.idx -= 1;
            self.col -= 1;
        }
        word
    }

    fn local_name(&mut self) -> String {
        let word = self.take_while(|c| is_name_char(c) || c == '.' || c == '%' || c == ':');
        self.give_back_dots(word)
    }

    fn iri_ref(&mut self, pos: Pos) -> Result<Tok, LexError> {
        self.bump();
        let mut iri = String::new();
        loop {
            match self.bump() {
                None => return Err(self.err(pos, "unterminated IRI")),
                Some('>') => return Ok(Tok::IriRef(iri)),
                Some(c) if c.is_whitespace() || c == '<' || c == '"' => {
                    return Err(self.err(pos, format!("invalid character {c:?} in IRI")))
                }
                Some(c) => iri.push(c),
            }
        }
    }

    fn string(&mut self, pos: Pos) -> Result<String, LexError> {
        let quote = self.bump().expect("quote");
        let long = self.peek() == Some(quote) && self.peek_at(1) == Some(quote);
        if long {
            self.bump();
            self.bump();
        }
        let mut out = String::new();
        loop {
            let Some(c) = self.bump() else {
                return Err(self.err(pos, "unterminated string literal"));
            };
            if c == quote {
                if !long {
                    return Ok(out);
                }
                if self.peek() == Some(quote) && self.peek_at(1) == Some(quote) {
                    self.bump();
                    self.bump();
                    return Ok(out);
                }
                out.push(c);
            } else if c == '\\' {
                let esc_pos = self.pos();
                let Some(e) = self.bump() else {
                    return Err(self.err(pos, "unterminated string literal"));
                };
                match e {
                    't' => out.push('\t'),
                    'n' => out.push('\n'),
                    'r' => out.push('\r'),
                    'b' => out.push('\u{8}'),
                    'f' => out.push('\u{c}'),
                    '"' => out.push('"'),
                    '\'' => out.push('\''),
                    '\\' => out.push('\\'),
                    'u' | 'U' => {
                        let n = if e == 'u' { 4 } else { 8 };
                        let hex: String = (0..n).filter_map(|_| self.bump()).collect();
                        let ch = u32::from_str_radix(&hex, 16)
                            .ok()
                            .and_then(char::from_u32)
                            .ok_or_else(|| self.err(esc_pos, format!("invalid unicode escape \\{e}{hex}")))?;
                        out.push(ch);
                    }
                    other => return Err(self.err(esc_pos, format!("invalid escape \\{other}"))),
                }
            } else if c == '\n' && !long {
                return Err(self.err(pos, "newline in short string literal"));
            } else {
                out.push(c);
            }
        }
    }

    fn number(&mut self) -> Tok {
        let mut s = String::new();
        if matches!(self.peek(), Some('+' | '-')) {
            s.push(self.bump().unwrap());
        }
        s.push_str(&self.take_while(|c| c.is_ascii_digit()));
        let mut kind = 0;
        if self.peek() == Some('.') && self.peek_at(1).is_some_and(|c| c.is_ascii_digit()) {
            s.push(self.bump().unwrap());
            s.push_str(&self.take_while(|c| c.is_ascii_digit()));
            kind = 1;
        }
        if matches!(self.peek(), Some('e' | 'E')) {
            let sign = matches!(self.peek_at(1), Some('+' | '-'));
            let digit_at = if sign { 2 } else { 1 };
            if self.peek_at(digit_at).is_some_and(|c| c.is_ascii_digit()) {
                s.push(self.bump().unwrap());
                if sign {
                    s.push(self.bump().unwrap());
                }
                s.push_str(&self.take_while(|c| c.is_ascii_digit()));
                kind = 2;
            }
        }
        match kind {
            0 => Tok::Integer(s),
            1 => Tok::Decimal(s),
            _ => Tok::Double(s),
        }
    }
}
