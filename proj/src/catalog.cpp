#include "mrn/catalog.hpp"

#include "mrn/errors.hpp"

namespace mrn {

namespace {

Reaction mass_action(const std::string& name, std::vector<std::pair<int, int>> in, std::vector<std::pair<int, int>> out,
                     double k)
{
    Reaction r;
    r.name = name;
    r.reactants = std::move(in);
    r.products = std::move(out);
    r.prop.kind = Kind::MassAction;
    r.prop.k = k;
    return r;
}

Species sp(const std::string& n, std::int64_t lo, std::int64_t hi, std::int64_t init) { return {n, lo, hi, init}; }

}  // namespace

std::vector<CatalogEntry> catalog()
{
    return {
        {"autocatalator", {}, "quadratic autocatalator with positive feedback (4 species, 6 reactions)"},
        {"sir", {}, "SIR epidemic model, x0 = (10, 2, 0)"},
        {"pharmacokinetic", {}, "five-compartment solvent model with saturable liver clearance"},
        {"opinion", {"liberal", "totalitarian"}, "public/private opinion formation, L = 40"},
        {"neural", {"asynchronous", "synchronous"}, "excitatory/inhibitory neural population, L = 100"},
        {"transcription", {}, "transcription regulation with fast dimerization (6 species, 10 reactions)"},
        {"birth-death", {}, "0 -> X (kb = 5), X -> 0 (kd = 1), X <= 40"},
        {"isomerization", {}, "A <-> B with kf = 1, kb = 2, one molecule"},
    };
}

Network autocatalator()
{
    Network net;
    net.name = "autocatalator";
    net.species = {sp("S", 0, 20, 20), sp("P", 0, 60, 0), sp("D", 0, 5, 5), sp("Q", 0, 60, 0)};
    const int S = 0, P = 1, D = 2, Q = 3;
    net.reactions = {
        mass_action("S->P", {{S, 1}}, {{P, 1}}, 0.5),
        mass_action("D+P->D+2P", {{D, 1}, {P, 1}}, {{D, 1}, {P, 2}}, 0.2),
        mass_action("2P->P+Q", {{P, 2}}, {{P, 1}, {Q, 1}}, 0.05),
        mass_action("P+Q->2Q", {{P, 1}, {Q, 1}}, {{Q, 2}}, 0.02),
        mass_action("P->0", {{P, 1}}, {}, 0.3),
        mass_action("Q->0", {{Q, 1}}, {}, 0.3),
    };
    net.finalize();
    return net;
}

Network sir_model(double k1, double k2, std::int64_t s0, std::int64_t i0, std::int64_t r0)
{
    const std::int64_t tot = s0 + i0 + r0;
    Network net;
    net.name = "sir";
    net.species = {sp("S", 0, tot, s0), sp("I", 0, tot, i0), sp("R", 0, tot, r0)};
    net.reactions = {
        mass_action("infection", {{0, 1}, {1, 1}}, {{1, 2}}, k1),
        mass_action("recovery", {{1, 1}}, {{2, 1}}, k2),
    };
    net.finalize();
    return net;
}

Network pharmacokinetic_model()
{
    // Rate constants are illustrative; the source model gives none numerically.
    Network net;
    net.name = "pharmacokinetic";
    for (int n = 1; n <= 5; ++n) net.species.push_back(sp("X" + std::to_string(n), 0, 60, 0));
    net.reactions.push_back(mass_action("injection", {}, {{0, 1}}, 2.0));
    const double kout[4] = {0.4, 0.3, 0.5, 0.6};
    const double kin[4] = {0.2, 0.3, 0.5, 0.4};
    for (int c = 0; c < 4; ++c) {
        net.reactions.push_back(mass_action("X1->X" + std::to_string(c + 2), {{0, 1}}, {{c + 1, 1}}, kout[c]));
        net.reactions.push_back(mass_action("X" + std::to_string(c + 2) + "->X1", {{c + 1, 1}}, {{0, 1}}, kin[c]));
    }
    Reaction clear;
    clear.name = "clearance";
    clear.reactants = {{4, 1}};
    clear.prop.kind = Kind::MichaelisMenten;
    clear.prop.k = 3.0;
    clear.prop.Km = 5.0;
    clear.prop.species = 4;
    net.reactions.push_back(clear);
    net.reversible_pairs = {{1, 2}, {3, 4}, {5, 6}, {7, 8}};
    net.finalize();
    return net;
}

Network opinion_model(int L, double k1, double k2, double a1, double a2, double a3)
{
    Network net;
    net.name = "opinion";
    net.time_unit = "day";
    net.species = {sp("X1", -L, L, 0), sp("X2", -L, L, 0)};
    auto rx = [&](const std::string& name, std::vector<std::pair<int, int>> out, double k, int target, double sign,
                  std::vector<double> a) {
        Reaction r;
        r.name = name;
        r.reactants = {{0, 1}, {1, 1}};
        r.products = std::move(out);
        r.prop.kind = Kind::OpinionExp;
        r.prop.k = k;
        r.prop.L = L;
        r.prop.species = target;
        r.prop.sign = sign;
        r.prop.coeffs = std::move(a);
        return r;
    };
    net.reactions = {
        rx("public+", {{0, 2}, {1, 1}}, k1, 0, +1.0, {a1, a2}),
        rx("public-", {{1, 1}}, k1, 0, -1.0, {a1, a2}),
        rx("private+", {{0, 1}, {1, 2}}, k2, 1, +1.0, {a3, 0.0}),
        rx("private-", {{0, 1}}, k2, 1, -1.0, {a3, 0.0}),
    };
    net.reversible_pairs = {{0, 1}, {2, 3}};
    net.finalize();
    return net;
}

Network opinion_preset(const std::string& preset)
{
    if (preset == "liberal" || preset.empty()) {
        Network n = opinion_model(40, 0.5, 1.0, 0.0, 1.0 / 80.0, 1.0 / 80.0);
        n.name = "opinion:liberal";
        return n;
    }
    if (preset == "totalitarian") {
        Network n = opinion_model(40, 0.5, 1.0, 3.0 / 80.0, 1.0 / 40.0, -1.0 / 320.0);
        n.name = "opinion:totalitarian";
        return n;
    }
    throw ConfigError("unknown opinion preset '" + preset + "'");
}

Network neural_model(double nuE, double nuI, int L, double gamma, double h)
{
    Network net;
    net.name = "neural";
    net.time_unit = "ms";
    const int cap = L / 2;
    net.species = {sp("Y1", 0, cap, 0), sp("Y2", 0, cap, 0)};
    auto act = [&](const std::string& name, int target, std::vector<std::pair<int, int>> out) {
        Reaction r;
        r.name = name;
        r.reactants = {{0, 1}, {1, 1}};
        r.products = std::move(out);
        r.prop.kind = Kind::NeuralTanh;
        r.prop.activation = true;
        r.prop.k = 1.0;
        r.prop.L = cap;
        r.prop.h = h;
        r.prop.species = target;
        r.prop.coeffs = {nuE, nuI};
        return r;
    };
    auto decay = [&](const std::string& name, int target) {
        Reaction r;
        r.name = name;
        r.reactants = {{target, 1}};
        r.prop.kind = Kind::NeuralTanh;
        r.prop.activation = false;
        r.prop.k = gamma;
        r.prop.species = target;
        return r;
    };
    net.reactions = {
        act("excite-on", 0, {{0, 2}, {1, 1}}),
        decay("excite-off", 0),
        act("inhibit-on", 1, {{0, 1}, {1, 2}}),
        decay("inhibit-off", 1),
    };
    net.reversible_pairs = {{0, 1}, {2, 3}};
    net.finalize();
    return net;
}

Network neural_preset(const std::string& preset)
{
    if (preset == "asynchronous" || preset.empty()) {
        Network n = neural_model(0.034, -0.00062);
        n.name = "neural:asynchronous";
        return n;
    }
    if (preset == "synchronous") {
        Network n = neural_model(0.140, -0.136);
        n.name = "neural:synchronous";
        return n;
    }
    throw ConfigError("unknown neural preset '" + preset + "'");
}

Network neural_sweep_model(double delta)
{
    Network n = neural_model((0.004 + delta) / 2.0, (0.004 - delta) / 2.0);
    n.name = "neural:delta=" + std::to_string(delta);
    return n;
}

Network transcription_model()
{
    Network net;
    net.name = "transcription";
    net.time_unit = "s";
    net.species = {sp("X1", 0, 400, 0), sp("X2", 0, 2000, 2), sp("X3", 0, 1000, 4),
                   sp("X4", 0, 2, 2),   sp("X5", 0, 2, 0),    sp("X6", 0, 2, 0)};
    net.reactions = {
        mass_action("translation", {{0, 1}}, {{0, 1}, {1, 1}}, 0.043),
        mass_action("dimerization", {{1, 2}}, {{2, 1}}, 0.083),
        mass_action("dissociation", {{2, 1}}, {{1, 2}}, 0.5),
        mass_action("bind1", {{2, 1}, {3, 1}}, {{4, 1}}, 0.0199),
        mass_action("unbind1", {{4, 1}}, {{2, 1}, {3, 1}}, 0.4791),
        mass_action("bind2", {{2, 1}, {4, 1}}, {{5, 1}}, 1.9926e-4),
        mass_action("unbind2", {{5, 1}}, {{2, 1}, {4, 1}}, 8.7658e-12),
        mass_action("transcription", {{4, 1}}, {{0, 1}, {4, 1}}, 0.0715),
        mass_action("mRNA-decay", {{0, 1}}, {}, 0.0039),
        mass_action("protein-decay", {{1, 1}}, {}, 0.0007),
    };
    net.reversible_pairs = {{1, 2}, {3, 4}, {5, 6}};
    net.finalize();
    return net;
}

Network birth_death_model(double kb, double kd, std::int64_t max, std::int64_t x0)
{
    Network net;
    net.name = "birth-death";
    net.species = {sp("X", 0, max, x0)};
    // The birth channel is switched off at the upper bound so the truncated chain is closed.
    Reaction birth;
    birth.name = "birth";
    birth.products = {{0, 1}};
    birth.prop.kind = Kind::Tabulated;
    Term t;
    t.coef = kb;
    t.powers = {0};
    t.fn = TermFn::None;
    birth.prop.terms = {t};
    Term off = t;
    off.coef = -kb;
    off.guard = {static_cast<int>(max)};
    birth.prop.terms.push_back(off);
    birth.convex = true;
    net.reactions = {birth, mass_action("death", {{0, 1}}, {}, kd)};
    net.reversible_pairs = {{0, 1}};
    net.finalize();
    return net;
}

Network isomerization_model(double kf, double kb, std::int64_t total)
{
    Network net;
    net.name = "isomerization";
    net.species = {sp("A", 0, total, total), sp("B", 0, total, 0)};
    net.reactions = {
        mass_action("A->B", {{0, 1}}, {{1, 1}}, kf),
        mass_action("B->A", {{1, 1}}, {{0, 1}}, kb),
    };
    net.reversible_pairs = {{0, 1}};
    net.finalize();
    return net;
}

Network builtin_model(const std::string& id, const std::string& preset)
{
    if (id == "autocatalator") return autocatalator();
    if (id == "sir") return sir_model();
    if (id == "pharmacokinetic") return pharmacokinetic_model();
    if (id == "opinion") return opinion_preset(preset);
    if (id == "neural") return neural_preset(preset);
    if (id == "transcription") return transcription_model();
    if (id == "birth-death") return birth_death_model(5.0, 1.0, 40);
    if (id == "isomerization") return isomerization_model(1.0, 2.0, 1);
    throw ConfigError("unknown builtin model '" + id + "'");
}

Network builtin_model(const std::string& ref)
{
    auto colon = ref.find(':');
    if (colon == std::string::npos) return builtin_model(ref, "");
    return builtin_model(ref.substr(0, colon), ref.substr(colon + 1));
}

}  // namespace mrn
