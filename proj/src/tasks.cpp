#include "gdesigner/tasks.hpp"

#include <algorithm>
#include <iterator>

#include "gdesigner/agents.hpp"
#include "gdesigner/rng.hpp"
#include "gdesigner/text.hpp"

namespace gdesigner {

double evaluate(const std::string& answer, const SyntheticTask& task) {
    return normalize_answer(answer) == normalize_answer(task.ground_truth) ? 1.0 : 0.0;
}

namespace {

const char* kCodenames[] = {"brimstone", "larkspur", "foxglove", "nightjar",
                            "ironwood",  "vermilion", "saffron",  "tamarind"};

SyntheticTask make_easy(Rng& rng) {
    const long long a = 2 + static_cast<long long>(rng.below(48));
    const long long b = 2 + static_cast<long long>(rng.below(48));
    SyntheticTask t;
    t.query = "Compute " + std::to_string(a) + " + " + std::to_string(b) + ".";
    t.category = "arith_easy";
    t.ground_truth = std::to_string(a + b);
    t.difficulty = 0.2;
    return t;
}

SyntheticTask make_hard(Rng& rng) {
    // ((a op1 b) op2 c) op3 d with positive intermediates throughout.
    const char ops_pool[] = {'+', '*', '-'};
    long long acc = 2 + static_cast<long long>(rng.below(8));
    std::string expr = std::to_string(acc);
    for (int step = 0; step < 3; ++step) {
        char op = ops_pool[rng.below(3)];
        long long operand = 2 + static_cast<long long>(rng.below(8));
        if (op == '-' && acc - operand < 1) op = '+';
        if (op == '*' && acc > 120) op = '-';
        if (op == '-' && acc - operand < 1) operand = 1;
        if (step == 0)
            expr = expr + " " + op + " " + std::to_string(operand);
        else
            expr = "(" + expr + ") " + op + " " + std::to_string(operand);
        switch (op) {
            case '+': acc += operand; break;
            case '-': acc -= operand; break;
            default: acc *= operand; break;
        }
    }
    SyntheticTask t;
    t.query = "Compute " + expr + ".";
    t.category = "arith_hard";
    t.ground_truth = std::to_string(acc);
    t.difficulty = 0.9;
    return t;
}

SyntheticTask make_choice(Rng& rng) {
    const long long a = 3 + static_cast<long long>(rng.below(40));
    const long long b = 3 + static_cast<long long>(rng.below(40));
    const long long target = a + b;
    const std::size_t correct = rng.below(4);
    long long options[4];
    for (std::size_t i = 0; i < 4; ++i) {
        if (i == correct) {
            options[i] = target;
            continue;
        }
        long long distract = target;
        while (distract == target ||
               [&] {
                   for (std::size_t j = 0; j < i; ++j)
                       if (options[j] == distract) return true;
                   return false;
               }())
            distract = target - 9 + static_cast<long long>(rng.below(19));
        options[i] = distract;
    }
    SyntheticTask t;
    t.query = "Which option equals " + std::to_string(a) + " + " + std::to_string(b) +
              "? Options: A) " + std::to_string(options[0]) + " B) " +
              std::to_string(options[1]) + " C) " + std::to_string(options[2]) + " D) " +
              std::to_string(options[3]) + ". Answer with the letter.";
    t.category = "choice";
    t.ground_truth = std::string(1, static_cast<char>('A' + correct));
    t.difficulty = 0.4;
    return t;
}

SyntheticTask make_relay(Rng& rng, const std::string& specialist_role) {
    const std::string codename =
        std::string(kCodenames[rng.below(std::size(kCodenames))]) + "-" +
        std::to_string(rng.below(1000));
    SyntheticTask t;
    t.query = "Consult the " + specialist_role + " and report the access code for " +
              codename + ".";
    t.category = "relay";
    t.ground_truth = std::to_string(relay_code_for(codename));
    t.difficulty = 0.6;
    return t;
}

} // namespace

std::vector<SyntheticTask> generate_suite(std::uint64_t seed, const SuiteCounts& counts,
                                          const std::string& specialist_role) {
    Rng rng(seed);
    std::vector<SyntheticTask> suite;
    Rng easy_rng = rng.child(1);
    for (std::size_t i = 0; i < counts.arith_easy; ++i) suite.push_back(make_easy(easy_rng));
    Rng hard_rng = rng.child(2);
    for (std::size_t i = 0; i < counts.arith_hard; ++i) suite.push_back(make_hard(hard_rng));
    Rng choice_rng = rng.child(3);
    for (std::size_t i = 0; i < counts.choice; ++i) suite.push_back(make_choice(choice_rng));
    Rng relay_rng = rng.child(4);
    for (std::size_t i = 0; i < counts.relay; ++i)
        suite.push_back(make_relay(relay_rng, specialist_role));
    return suite;
}

} // namespace gdesigner
