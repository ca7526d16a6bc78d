#include "mrn/model_io.hpp"

#include <fstream>
#include <sstream>

#include "mrn/errors.hpp"

namespace mrn {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& ptr, const std::string& msg)
{
    throw ConfigError(ptr + ": " + msg);
}

const json& need(const json& j, const char* key, const std::string& ptr)
{
    if (!j.is_object()) fail(ptr, "expected an object");
    auto it = j.find(key);
    if (it == j.end()) fail(ptr + "/" + key, "missing required field");
    return *it;
}

double num(const json& j, const std::string& ptr)
{
    if (!j.is_number()) fail(ptr, "expected a number");
    return j.get<double>();
}

std::int64_t integer(const json& j, const std::string& ptr)
{
    if (!j.is_number_integer()) fail(ptr, "expected an integer");
    return j.get<std::int64_t>();
}

double num_or(const json& params, const char* key, double dflt, const std::string& ptr)
{
    auto it = params.find(key);
    if (it == params.end()) return dflt;
    return num(*it, ptr + "/" + key);
}

double num_req(const json& params, const char* key, const std::string& ptr)
{
    return num(need(params, key, ptr), ptr + "/" + key);
}

int species_ref(const json& j, const Network& net, const std::string& ptr)
{
    if (j.is_number_integer()) {
        int i = j.get<int>();
        if (i < 0 || i >= net.N()) fail(ptr, "species index out of range");
        return i;
    }
    if (j.is_string()) {
        int i = net.species_index(j.get<std::string>());
        if (i < 0) fail(ptr, "unknown species '" + j.get<std::string>() + "'");
        return i;
    }
    fail(ptr, "expected a species name or index");
}

// Array of N numbers or object {species: value}.
std::vector<double> species_row(const json& j, const Network& net, const std::string& ptr)
{
    std::vector<double> row(net.N(), 0.0);
    if (j.is_array()) {
        if (j.size() > row.size()) fail(ptr, "row longer than species list");
        for (std::size_t i = 0; i < j.size(); ++i) row[i] = num(j[i], ptr + "/" + std::to_string(i));
    } else if (j.is_object()) {
        for (auto it = j.begin(); it != j.end(); ++it)
            row[species_ref(json(it.key()), net, ptr + "/" + it.key())] = num(it.value(), ptr + "/" + it.key());
    } else {
        fail(ptr, "expected an array or object");
    }
    return row;
}

std::vector<std::pair<int, int>> stoich_map(const json& j, const Network& net, const std::string& ptr)
{
    std::vector<std::pair<int, int>> out;
    if (!j.is_object()) fail(ptr, "expected an object {species: coefficient}");
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string p = ptr + "/" + it.key();
        int s = net.species_index(it.key());
        if (s < 0) fail(p, "unknown species '" + it.key() + "'");
        std::int64_t c = integer(it.value(), p);
        if (c < 0) fail(p, "stoichiometric coefficient must be nonnegative");
        out.emplace_back(s, static_cast<int>(c));
    }
    return out;
}

TermFn term_fn(const std::string& s, const std::string& ptr)
{
    if (s == "none") return TermFn::None;
    if (s == "exp") return TermFn::Exp;
    if (s == "tanh") return TermFn::Tanh;
    if (s == "tanh_pos") return TermFn::TanhPos;
    fail(ptr, "unknown term function '" + s + "'");
}

const char* term_fn_name(TermFn f)
{
    switch (f) {
    case TermFn::None: return "none";
    case TermFn::Exp: return "exp";
    case TermFn::Tanh: return "tanh";
    case TermFn::TanhPos: return "tanh_pos";
    }
    return "none";
}

Propensity parse_propensity(const json& j, const Network& net, const std::string& ptr)
{
    Propensity p;
    if (!j.is_object()) fail(ptr, "expected an object");
    auto kit = j.find("kind");
    if (kit == j.end() || !kit->is_string()) fail(ptr, "missing propensity kind");
    try {
        p.kind = kind_from_name(kit->get<std::string>());
    } catch (const ConfigError& e) {
        fail(ptr + "/kind", e.what());
    }
    static const json empty = json::object();
    const json& params = j.contains("params") ? j["params"] : empty;
    const std::string pp = ptr + "/params";
    if (!params.is_object()) fail(pp, "expected an object");
    switch (p.kind) {
    case Kind::MassAction: p.k = num_req(params, "k", pp); break;
    case Kind::Hyperbolic:
        p.k = num_req(params, "k", pp);
        p.theta = num_req(params, "theta", pp);
        p.species = species_ref(need(params, "substrate", pp), net, pp + "/substrate");
        p.cofactor = species_ref(need(params, "cofactor", pp), net, pp + "/cofactor");
        break;
    case Kind::MichaelisMenten:
        p.k = num_req(params, "V", pp);
        p.Km = num_req(params, "K", pp);
        p.species = species_ref(need(params, "substrate", pp), net, pp + "/substrate");
        break;
    case Kind::OpinionExp:
        p.k = num_req(params, "k", pp);
        p.L = num_req(params, "L", pp);
        p.sign = num_or(params, "sign", 1.0, pp);
        if (p.sign != 1.0 && p.sign != -1.0) fail(pp + "/sign", "sign must be +1 or -1");
        p.species = species_ref(need(params, "species", pp), net, pp + "/species");
        p.coeffs = species_row(need(params, "a", pp), net, pp + "/a");
        break;
    case Kind::NeuralTanh: {
        const json& role = need(params, "role", pp);
        if (!role.is_string() || (role != "activation" && role != "decay"))
            fail(pp + "/role", "role must be 'activation' or 'decay'");
        p.activation = role == "activation";
        p.species = species_ref(need(params, "species", pp), net, pp + "/species");
        if (p.activation) {
            p.k = num_or(params, "k", 1.0, pp);
            p.L = num_req(params, "cap", pp);
            p.h = num_or(params, "h", 0.0, pp);
            p.coeffs = species_row(need(params, "weights", pp), net, pp + "/weights");
        } else {
            p.k = num_req(params, "gamma", pp);
        }
        break;
    }
    case Kind::Tabulated: {
        const json& terms = need(params, "terms", pp);
        if (!terms.is_array()) fail(pp + "/terms", "expected an array");
        for (std::size_t t = 0; t < terms.size(); ++t) {
            const std::string tp = pp + "/terms/" + std::to_string(t);
            const json& tj = terms[t];
            Term term;
            term.coef = num_req(tj, "coef", tp);
            if (tj.contains("powers")) {
                auto row = species_row(tj["powers"], net, tp + "/powers");
                for (double v : row) {
                    if (v < 0 || v != static_cast<int>(v)) fail(tp + "/powers", "powers must be nonnegative integers");
                    term.powers.push_back(static_cast<int>(v));
                }
            }
            if (tj.contains("guard")) {
                auto row = species_row(tj["guard"], net, tp + "/guard");
                for (double v : row) term.guard.push_back(static_cast<int>(v));
            }
            if (tj.contains("fn")) {
                if (!tj["fn"].is_string()) fail(tp + "/fn", "expected a string");
                term.fn = term_fn(tj["fn"].get<std::string>(), tp + "/fn");
            }
            if (term.fn != TermFn::None) {
                const json& aff = need(tj, "affine", tp);
                if (aff.is_array()) {
                    if (aff.size() > static_cast<std::size_t>(net.N() + 1)) fail(tp + "/affine", "too many entries");
                    for (std::size_t i = 0; i < aff.size(); ++i)
                        term.affine.push_back(num(aff[i], tp + "/affine/" + std::to_string(i)));
                } else {
                    fail(tp + "/affine", "expected an array [c0, c1, ..., cN]");
                }
            }
            p.terms.push_back(std::move(term));
        }
        break;
    }
    }
    return p;
}

json row_json(const std::vector<double>& row) { return json(row); }

}  // namespace

Network network_from_json(const json& j)
{
    Network net;
    if (!j.is_object()) fail("", "model must be a JSON object");
    if (j.contains("name") && j["name"].is_string()) net.name = j["name"].get<std::string>();
    if (j.contains("time_unit") && j["time_unit"].is_string()) net.time_unit = j["time_unit"].get<std::string>();
    const json& sp = need(j, "species", "");
    if (!sp.is_array() || sp.empty()) fail("/species", "expected a nonempty array");
    for (std::size_t i = 0; i < sp.size(); ++i) {
        const std::string p = "/species/" + std::to_string(i);
        Species s;
        const json& nm = need(sp[i], "name", p);
        if (!nm.is_string()) fail(p + "/name", "expected a string");
        s.name = nm.get<std::string>();
        if (net.species_index(s.name) >= 0) fail(p + "/name", "duplicate species name");
        s.min = sp[i].contains("min") ? integer(sp[i]["min"], p + "/min") : 0;
        s.max = integer(need(sp[i], "max", p), p + "/max");
        s.init = sp[i].contains("init") ? integer(sp[i]["init"], p + "/init") : s.min;
        if (s.min > s.max) fail(p, "min exceeds max");
        if (s.init < s.min || s.init > s.max) fail(p + "/init", "initial value outside [min, max]");
        net.species.push_back(s);
    }
    const json& rx = need(j, "reactions", "");
    if (!rx.is_array() || rx.empty()) fail("/reactions", "expected a nonempty array");
    for (std::size_t m = 0; m < rx.size(); ++m) {
        const std::string p = "/reactions/" + std::to_string(m);
        const json& rj = rx[m];
        if (!rj.is_object()) fail(p, "expected an object");
        Reaction r;
        r.name = rj.contains("name") && rj["name"].is_string() ? rj["name"].get<std::string>() : "R" + std::to_string(m + 1);
        if (rj.contains("reactants")) r.reactants = stoich_map(rj["reactants"], net, p + "/reactants");
        if (rj.contains("products")) r.products = stoich_map(rj["products"], net, p + "/products");
        r.prop = parse_propensity(need(rj, "propensity", p), net, p + "/propensity");
        if (rj.contains("convex")) {
            if (!rj["convex"].is_boolean()) fail(p + "/convex", "expected a boolean");
            r.convex = rj["convex"].get<bool>();
        }
        net.reactions.push_back(std::move(r));
    }
    if (j.contains("reversible_pairs")) {
        const json& rp = j["reversible_pairs"];
        if (!rp.is_array()) fail("/reversible_pairs", "expected an array");
        for (std::size_t q = 0; q < rp.size(); ++q) {
            const std::string p = "/reversible_pairs/" + std::to_string(q);
            if (!rp[q].is_array() || rp[q].size() != 2) fail(p, "expected [forward, reverse]");
            int f = static_cast<int>(integer(rp[q][0], p + "/0"));
            int b = static_cast<int>(integer(rp[q][1], p + "/1"));
            if (f < 0 || f >= net.M() || b < 0 || b >= net.M()) fail(p, "reaction index out of range");
            net.reversible_pairs.emplace_back(f, b);
        }
    }
    net.finalize();
    auto rep = validate_network(net);
    if (!rep.ok()) {
        std::ostringstream os;
        for (const auto& e : rep.errors) os << e << "; ";
        fail("", os.str());
    }
    return net;
}

json network_to_json(const Network& net)
{
    json j;
    j["name"] = net.name;
    j["time_unit"] = net.time_unit;
    j["species"] = json::array();
    for (const auto& s : net.species) j["species"].push_back({{"name", s.name}, {"min", s.min}, {"max", s.max}, {"init", s.init}});
    j["reactions"] = json::array();
    for (const auto& r : net.reactions) {
        json rj;
        rj["name"] = r.name;
        rj["reactants"] = json::object();
        rj["products"] = json::object();
        for (auto [s, c] : r.reactants) rj["reactants"][net.species[s].name] = c;
        for (auto [s, c] : r.products) rj["products"][net.species[s].name] = c;
        const Propensity& p = r.prop;
        json params = json::object();
        auto sp = [&](int i) { return net.species[i].name; };
        switch (p.kind) {
        case Kind::MassAction: params["k"] = p.k; break;
        case Kind::Hyperbolic:
            params = {{"k", p.k}, {"theta", p.theta}, {"substrate", sp(p.species)}, {"cofactor", sp(p.cofactor)}};
            break;
        case Kind::MichaelisMenten: params = {{"V", p.k}, {"K", p.Km}, {"substrate", sp(p.species)}}; break;
        case Kind::OpinionExp:
            params = {{"k", p.k}, {"L", p.L}, {"sign", p.sign}, {"species", sp(p.species)}, {"a", row_json(p.coeffs)}};
            break;
        case Kind::NeuralTanh:
            if (p.activation)
                params = {{"role", "activation"}, {"species", sp(p.species)}, {"k", p.k}, {"cap", p.L}, {"h", p.h},
                          {"weights", row_json(p.coeffs)}};
            else
                params = {{"role", "decay"}, {"species", sp(p.species)}, {"gamma", p.k}};
            break;
        case Kind::Tabulated: {
            json terms = json::array();
            for (const Term& t : p.terms) {
                json tj;
                tj["coef"] = t.coef;
                if (!t.powers.empty()) tj["powers"] = t.powers;
                if (!t.guard.empty()) tj["guard"] = t.guard;
                tj["fn"] = term_fn_name(t.fn);
                if (t.fn != TermFn::None) tj["affine"] = t.affine;
                terms.push_back(tj);
            }
            params["terms"] = terms;
            break;
        }
        }
        rj["propensity"] = {{"kind", kind_name(p.kind)}, {"params", params}};
        if (r.convex) rj["convex"] = *r.convex;
        j["reactions"].push_back(rj);
    }
    j["reversible_pairs"] = json::array();
    for (auto [f, b] : net.reversible_pairs) j["reversible_pairs"].push_back({f, b});
    return j;
}

Network load_model_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open model file '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("model file is not valid JSON: ") + e.what());
    }
    return network_from_json(j);
}

void save_model_file(const Network& net, const std::string& path)
{
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write model file '" + path + "'");
    out << network_to_json(net).dump(2) << "\n";
}

}  // namespace mrn
