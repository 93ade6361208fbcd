#include "gdesigner/agents.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>

#include "gdesigner/errors.hpp"
#include "gdesigner/text.hpp"

namespace gdesigner {

double EmbeddingVector::norm() const {
    double s = 0.0;
    for (double v : values) s += v * v;
    return std::sqrt(s);
}

std::uint64_t relay_code_for(const std::string& codename) {
    return 1000 + fnv1a64("code:" + to_lower(trim(codename)), 77) % 9000;
}

namespace {

// ---------------------------------------------------------------------------
// Arithmetic expression handling for the simulator. Expressions are the fully
// parenthesized integer forms emitted by the synthetic task generator, e.g.
// "((3 + 4) * 2) - 5". Tokens: non-negative integer literals, + - *, parens.
// ---------------------------------------------------------------------------

struct Token {
    enum Kind { Num, Op, LParen, RParen } kind;
    long long value = 0;
    char op = 0;
};

bool tokenize_expr(const std::string& s, std::vector<Token>& out) {
    out.clear();
    std::size_t i = 0;
    while (i < s.size()) {
        const char c = s[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            ++i;
        } else if (std::isdigit(static_cast<unsigned char>(c))) {
            long long v = 0;
            while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) {
                v = v * 10 + (s[i] - '0');
                ++i;
            }
            out.push_back({Token::Num, v, 0});
        } else if (c == '+' || c == '-' || c == '*') {
            out.push_back({Token::Op, 0, c});
            ++i;
        } else if (c == '(') {
            out.push_back({Token::LParen, 0, 0});
            ++i;
        } else if (c == ')') {
            out.push_back({Token::RParen, 0, 0});
            ++i;
        } else {
            return false;
        }
    }
    return !out.empty();
}

std::size_t count_ops(const std::vector<Token>& t) {
    std::size_t n = 0;
    for (const auto& tok : t)
        if (tok.kind == Token::Op) ++n;
    return n;
}

long long apply_op(long long a, char op, long long b) {
    switch (op) {
        case '+': return a + b;
        case '-': return a - b;
        default: return a * b;
    }
}

// Evaluates the innermost parenthesized binary op (or the whole expression if
// it is a bare "a op b"). Returns false when no reducible step exists.
// `bias` is added to the computed step value (0 honest, nonzero corrupted).
bool reduce_once(std::vector<Token>& t, long long bias) {
    // Innermost group = last '('.
    std::size_t open = t.size();
    for (std::size_t i = 0; i < t.size(); ++i)
        if (t[i].kind == Token::LParen) open = i;
    if (open != t.size()) {
        // Expect: ( Num Op Num )
        if (open + 4 < t.size() && t[open + 1].kind == Token::Num &&
            t[open + 2].kind == Token::Op && t[open + 3].kind == Token::Num &&
            t[open + 4].kind == Token::RParen) {
            const long long v =
                apply_op(t[open + 1].value, t[open + 2].op, t[open + 3].value) + bias;
            Token num{Token::Num, v, 0};
            t.erase(t.begin() + static_cast<std::ptrdiff_t>(open),
                    t.begin() + static_cast<std::ptrdiff_t>(open) + 5);
            t.insert(t.begin() + static_cast<std::ptrdiff_t>(open), num);
            return true;
        }
        return false;
    }
    // No parens: reduce the leftmost op.
    for (std::size_t i = 0; i + 1 < t.size(); ++i) {
        if (t[i].kind == Token::Num && t[i + 1].kind == Token::Op &&
            i + 2 < t.size() && t[i + 2].kind == Token::Num) {
            const long long v = apply_op(t[i].value, t[i + 1].op, t[i + 2].value) + bias;
            Token num{Token::Num, v, 0};
            t.erase(t.begin() + static_cast<std::ptrdiff_t>(i),
                    t.begin() + static_cast<std::ptrdiff_t>(i) + 3);
            t.insert(t.begin() + static_cast<std::ptrdiff_t>(i), num);
            return true;
        }
    }
    return false;
}

std::string render_expr(const std::vector<Token>& t) {
    std::string out;
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (!out.empty()) out += ' ';
        switch (t[i].kind) {
            case Token::Num: out += std::to_string(t[i].value); break;
            case Token::Op: out += t[i].op; break;
            case Token::LParen: out += '('; break;
            case Token::RParen: out += ')'; break;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Prompt parsing.
// ---------------------------------------------------------------------------

struct ParsedPrompt {
    std::string query;
    std::vector<std::string> upstream_texts; // in presented order
};

ParsedPrompt parse_user_prompt(const std::string& user) {
    ParsedPrompt p;
    const auto lines = split_lines(user);
    bool have_query = false;
    for (const auto& line : lines) {
        if (!have_query) {
            p.query = line;
            have_query = true;
            continue;
        }
        if (line.rfind("Agent ", 0) == 0) {
            const std::size_t sep = line.find("): ");
            if (sep != std::string::npos) {
                p.upstream_texts.push_back(line.substr(sep + 3));
                continue;
            }
        }
        // Continuation lines of a multi-line upstream response attach to the
        // previous block; anything before the first block extends the query.
        if (!p.upstream_texts.empty())
            p.upstream_texts.back() += "\n" + line;
        else if (!line.empty())
            p.query += "\n" + line;
    }
    return p;
}

struct ChoiceOption {
    char letter;
    long long value;
};

struct ParsedQuery {
    enum Kind { Arith, Choice, Relay, Unknown } kind = Unknown;
    std::vector<Token> expr;
    std::size_t query_ops = 0;
    long long choice_lhs = 0, choice_rhs = 0;
    std::vector<ChoiceOption> options;
    std::string relay_role;
    std::string relay_codename;
};

bool parse_number_at(const std::string& s, std::size_t& i, long long& out) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    if (i >= s.size() || !std::isdigit(static_cast<unsigned char>(s[i]))) return false;
    long long v = 0;
    while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) {
        v = v * 10 + (s[i] - '0');
        ++i;
    }
    out = v;
    return true;
}

ParsedQuery parse_query(const std::string& query) {
    ParsedQuery q;
    const std::string low = to_lower(query);

    if (low.rfind("compute", 0) == 0) {
        std::string body = trim(query.substr(7));
        if (!body.empty() && body.back() == '.') body.pop_back();
        if (tokenize_expr(body, q.expr)) {
            q.kind = ParsedQuery::Arith;
            q.query_ops = count_ops(q.expr);
        }
        return q;
    }

    if (low.rfind("which option equals", 0) == 0) {
        std::size_t i = std::string("which option equals").size();
        long long a = 0, b = 0;
        if (!parse_number_at(query, i, a)) return q;
        while (i < query.size() && std::isspace(static_cast<unsigned char>(query[i]))) ++i;
        if (i >= query.size() || query[i] != '+') return q;
        ++i;
        if (!parse_number_at(query, i, b)) return q;
        q.choice_lhs = a;
        q.choice_rhs = b;
        for (char letter : {'A', 'B', 'C', 'D'}) {
            const std::string tag = std::string(1, letter) + ") ";
            const std::size_t pos = query.find(tag, i);
            if (pos == std::string::npos) return q;
            std::size_t j = pos + tag.size();
            long long v = 0;
            if (!parse_number_at(query, j, v)) return q;
            q.options.push_back({letter, v});
        }
        q.kind = ParsedQuery::Choice;
        return q;
    }

    const std::size_t consult = low.find("consult the ");
    const std::size_t report = low.find(" and report the access code for ");
    if (consult != std::string::npos && report != std::string::npos && report > consult) {
        const std::size_t role_start = consult + std::string("consult the ").size();
        q.relay_role = trim(query.substr(role_start, report - role_start));
        std::string name = trim(
            query.substr(report + std::string(" and report the access code for ").size()));
        if (!name.empty() && name.back() == '.') name.pop_back();
        q.relay_codename = trim(name);
        if (!q.relay_role.empty() && !q.relay_codename.empty()) q.kind = ParsedQuery::Relay;
        return q;
    }

    return q;
}

bool parse_int_answer(const std::string& normalized, long long& out) {
    if (normalized.empty()) return false;
    std::size_t i = 0;
    bool neg = false;
    if (normalized[0] == '-') {
        neg = true;
        i = 1;
        if (normalized.size() == 1) return false;
    }
    long long v = 0;
    for (; i < normalized.size(); ++i) {
        if (!std::isdigit(static_cast<unsigned char>(normalized[i]))) return false;
        v = v * 10 + (normalized[i] - '0');
    }
    out = neg ? -v : v;
    return true;
}

bool is_filler_answer(const std::string& normalized) {
    return normalized.empty() || normalized == "unknown" || normalized == "incomplete";
}

// Modal answer with ties resolved by first appearance.
std::string modal_answer(const std::vector<std::string>& answers) {
    std::string best;
    std::size_t best_count = 0;
    for (std::size_t i = 0; i < answers.size(); ++i) {
        std::size_t count = 0;
        for (const auto& a : answers)
            if (a == answers[i]) ++count;
        if (count > best_count) {
            best_count = count;
            best = answers[i];
        }
    }
    return best;
}

char rotate_choice(char letter, int by) {
    const int idx = (std::toupper(static_cast<unsigned char>(letter)) - 'A' + by) % 4;
    return static_cast<char>('A' + idx);
}

} // namespace

MockBackend::MockBackend(MockBackendConfig config) : config_(std::move(config)) {}

double MockBackend::skill_for(std::size_t agent_id, const std::string& category) const {
    for (const auto& s : config_.agent_skill)
        if (s.agent_id == agent_id && s.category == category) return s.p;
    const auto it = config_.category_skill.find(category);
    if (it != config_.category_skill.end()) return it->second;
    return config_.default_skill;
}

bool MockBackend::is_adoptive(std::size_t agent_id) const {
    const auto it = config_.adoptive.find(agent_id);
    return it == config_.adoptive.end() ? true : it->second;
}

AgentResponse MockBackend::respond(const AgentSpec& agent, const Prompt& prompt,
                                   Rng& /*rng*/) {
    // All randomness is re-derived from the call inputs: pure per invocation.
    std::uint64_t h = fnv1a64(prompt.system, 11) ^ fnv1a64(prompt.user, 22) ^
                      (0x9E3779B97F4A7C15ULL * (agent.id + 1)) ^ config_.seed;
    Rng local(h);

    const bool hijacked =
        prompt.system.find(agent.role) == std::string::npos && !agent.role.empty();
    const ParsedPrompt parsed = parse_user_prompt(prompt.user);
    const ParsedQuery query = parse_query(parsed.query);
    const bool summarizer = to_lower(agent.role) == "summarizer";
    const bool adoptive = is_adoptive(agent.id);

    std::vector<std::string> upstream_answers;
    for (const auto& t : parsed.upstream_texts) {
        const std::string a = normalize_answer(t);
        if (!is_filler_answer(a)) upstream_answers.push_back(a);
    }

    std::string text;
    if (summarizer) {
        std::string pick = upstream_answers.empty() ? std::string("unknown")
                                                    : modal_answer(upstream_answers);
        if (hijacked) {
            long long v = 0;
            if (parse_int_answer(pick, v))
                pick = std::to_string(v + 1);
            else if (pick.size() == 1 && pick[0] >= 'a' && pick[0] <= 'd')
                pick = std::string(1, rotate_choice(pick[0], 1));
        }
        text = "Synthesis of " + std::to_string(parsed.upstream_texts.size()) +
               " replies. Answer: " + pick;
    } else if (query.kind == ParsedQuery::Arith) {
        const std::string category = query.query_ops <= 1 ? "arith_easy" : "arith_hard";
        const double skill = skill_for(agent.id, category);
        const bool succeed = local.uniform() < skill;

        // Continue from the most reduced expression in sight: the query, a
        // peer's partial, or a peer's finished value (the modal one when
        // several peers finished). Echoing a finished value needs no skill;
        // own computation does.
        std::vector<Token> work = query.expr;
        std::size_t best_ops = count_ops(work);
        if (adoptive) {
            for (const auto& t : parsed.upstream_texts) {
                const std::size_t ppos = t.find("Partial: ");
                if (ppos == std::string::npos) continue;
                const std::size_t apos = t.find(" Answer:", ppos);
                if (apos == std::string::npos) continue;
                const std::string expr_text = t.substr(ppos + 9, apos - (ppos + 9));
                std::vector<Token> cand;
                if (tokenize_expr(expr_text, cand) && count_ops(cand) < best_ops) {
                    work = cand;
                    best_ops = count_ops(cand);
                }
            }
            std::vector<std::string> numeric;
            for (const auto& a : upstream_answers) {
                long long v = 0;
                if (parse_int_answer(a, v)) numeric.push_back(a);
            }
            if (!numeric.empty()) {
                long long v = 0;
                parse_int_answer(modal_answer(numeric), v);
                work = {Token{Token::Num, v, 0}};
                best_ops = 0;
            }
        }
        long long bias = 0;
        if (hijacked)
            bias = 1;
        else if (!succeed)
            bias = 1 + static_cast<long long>(local.below(9));
        int steps = config_.steps_per_turn;
        bool computed = false;
        while (steps > 0 && count_ops(work) > 0) {
            if (!reduce_once(work, bias)) break;
            bias = 0; // only the first computed step is corrupted/botched
            computed = true;
            --steps;
        }
        if (count_ops(work) == 0 && work.size() == 1 && work[0].kind == Token::Num) {
            long long value = work[0].value;
            if (hijacked && !computed) value += 1; // pure echoes get corrupted here
            text = "Result " + std::to_string(value) + ". Answer: " + std::to_string(value);
        } else {
            text = "Partial: " + render_expr(work) + " Answer: incomplete";
        }
    } else if (query.kind == ParsedQuery::Choice) {
        std::vector<std::string> letters;
        for (const auto& a : upstream_answers)
            if (a.size() == 1 && a[0] >= 'a' && a[0] <= 'd') letters.push_back(a);
        char letter = 0;
        if (adoptive && !letters.empty()) {
            letter = static_cast<char>(std::toupper(
                static_cast<unsigned char>(modal_answer(letters)[0])));
            text = "Concur with peers. Answer: ";
        } else {
            const long long target = query.choice_lhs + query.choice_rhs;
            for (const auto& o : query.options)
                if (o.value == target) letter = o.letter;
            if (letter == 0) letter = 'A';
            const bool succeed = local.uniform() < skill_for(agent.id, "choice");
            if (!succeed) letter = rotate_choice(letter, 1 + static_cast<int>(local.below(3)));
            text = "Option check. Answer: ";
        }
        if (hijacked) letter = rotate_choice(letter, 1);
        text += std::string(1, letter);
    } else if (query.kind == ParsedQuery::Relay) {
        const bool specialist = to_lower(agent.role) == to_lower(query.relay_role);
        long long code = -1;
        std::string flavor;
        if (specialist) {
            code = static_cast<long long>(relay_code_for(query.relay_codename));
            const bool succeed = local.uniform() < skill_for(agent.id, "relay");
            if (!succeed) code += 1 + static_cast<long long>(local.below(99));
            flavor = "Code retrieved.";
        } else if (adoptive) {
            std::vector<std::string> numeric;
            for (const auto& a : upstream_answers) {
                long long v = 0;
                if (parse_int_answer(a, v)) numeric.push_back(a);
            }
            if (!numeric.empty()) {
                parse_int_answer(modal_answer(numeric), code);
                flavor = "Concur with peers.";
            }
        }
        if (code < 0) {
            text = "No basis to answer. Answer: unknown";
        } else {
            if (hijacked) code += 1;
            text = flavor + " Answer: " + std::to_string(code);
        }
    } else {
        text = "No basis to answer. Answer: unknown";
    }

    AgentResponse r;
    r.agent_id = agent.id;
    r.text = text;
    r.prompt_tokens = whitespace_token_count(prompt.system) +
                      whitespace_token_count(prompt.user);
    r.completion_tokens = whitespace_token_count(text);
    return r;
}

HashEmbedder::HashEmbedder(std::size_t dim) : dim_(dim) {
    if (dim == 0) throw ConfigError("HashEmbedder: dim must be positive");
}

EmbeddingVector HashEmbedder::embed(const std::string& text) {
    EmbeddingVector v;
    v.values.assign(dim_, 0.0);
    if (text.empty()) {
        v.values[0] = 1.0;
        return v;
    }
    const std::size_t gram = 3;
    auto add = [&](std::string_view g) {
        const std::uint64_t bucket = fnv1a64(g, 1) % dim_;
        const std::uint64_t sign = fnv1a64(g, 2) & 1;
        v.values[bucket] += sign ? 1.0 : -1.0;
    };
    if (text.size() < gram) {
        add(text);
    } else {
        for (std::size_t i = 0; i + gram <= text.size(); ++i)
            add(std::string_view(text).substr(i, gram));
    }
    double n = v.norm();
    if (n == 0.0) {
        v.values.assign(dim_, 0.0);
        v.values[0] = 1.0;
        return v;
    }
    for (double& x : v.values) x /= n;
    return v;
}

EmbeddingVector encode_agent(const AgentSpec& agent, Embedder& provider) {
    std::string text = agent.base_descriptor;
    text += '\n';
    text += agent.role;
    for (const auto& p : agent.plugins) {
        text += '\n';
        text += p;
    }
    return provider.embed(text);
}

} // namespace gdesigner
