/// Splits `text` into word windows of `chunk_words` advancing by
/// `chunk_words - overlap_words`. The last window ends at the final word.
/// Chunk texts are the window's words joined by single spaces.
pub fn chunk_words(text: &str, chunk_words: usize, overlap_words: usize) -> Vec<String> {
    assert!(chunk_words > overlap_words, "chunk size must exceed overlap");
    let words: Vec<&str> = text.split_whitespace().collect();
    let stride = chunk_words - overlap_words;
    let mut chunks = Vec::new();
    let mut start = 0;
    while start < words.len() {
        let end = (start + chunk_words).min(words.len());
        chunks.push(words[start..end].join(" "));
        if end == words.len() {
            break;
        }
        start += stride;
    }
    chunks
}

/// Inverse of [`chunk_words`]: drops the overlapping prefix of every chunk
/// after the first. Yields the whitespace-normalized source text.
pub fn reassemble(chunks: &[String], overlap_words: usize) -> String {
    let mut words: Vec<&str> = Vec::new();
    for (i, c) in chunks.iter().enumerate() {
        let skip = if i == 0 { 0 } else { overlap_words };
        words.extend(c.split_whitespace().skip(skip));
    }
    words.join(" ")
}

/// Removes caption numbering, timestamps and `WEBVTT` headers from SRT/VTT
/// subtitle text, keeping the spoken lines.
pub fn strip_caption_markup(text: &str) -> String {
    let mut out = Vec::new();
    let mut in_note = false;
    for line in text.lines() {
        let t = line.trim().trim_start_matches('\u{feff}');
        if t.is_empty() {
            in_note = false;
            continue;
        }
        if in_note {
            continue;
        }
        if t == "WEBVTT" || t.starts_with("WEBVTT ") || t.starts_with("Kind:") || t.starts_with("Language:") {
            continue;
        }
        if t.starts_with("NOTE") || t.starts_with("STYLE") || t.starts_with("REGION") {
            in_note = true;
            continue;
        }
        if t.contains("-->") || t.chars().all(|c| c.is_ascii_digit()) {
            continue;
        }
        out.push(strip_tags(t));
    }
    out.join("\n")
}

fn strip_tags(line: &str) -> String {
    let mut s = String::with_capacity(line.len());
    let mut depth = 0;
    for c in line.chars() {
        match c {
            '<' => depth += 1,
            '>' if depth > 0 => depth -= 1,
            _ if depth == 0 => s.push(c),
            _ => {}
        }
    }
    s
}
