#pragma once

#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "parabolica/amplifier.hpp"
#include "parabolica/conjugacy.hpp"
#include "parabolica/construct.hpp"
#include "parabolica/diffeo.hpp"
#include "parabolica/flow.hpp"
#include "parabolica/surgery.hpp"

namespace parabolica {

using json = nlohmann::json;

/// Strict-parsing helper: rejects unknown keys with their JSON path.
inline void check_keys(const json& j, const std::set<std::string>& allowed,
                       const std::string& path) {
    if (!j.is_object()) throw ConfigError(path + ": expected an object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key()))
            throw ConfigError(path + "." + it.key() + ": unknown field");
}

inline const json& need(const json& j, const std::string& key, const std::string& path) {
    auto it = j.find(key);
    if (it == j.end()) throw ConfigError(path + "." + key + ": missing field");
    return *it;
}

template <class R>
std::vector<R> parse_reals(const json& j, const std::string& path) {
    if (!j.is_array()) throw ConfigError(path + ": expected an array of numbers");
    std::vector<R> out;
    out.reserve(j.size());
    for (const auto& v : j) out.push_back(real_traits<R>::from_double(v.get<double>()));
    return out;
}

template <class R>
json dump_reals(const std::vector<R>& xs) {
    json out = json::array();
    for (const auto& x : xs) out.push_back(dbl(x));
    return out;
}

// ---------------------------------------------------------------------------
// vector fields
// ---------------------------------------------------------------------------

template <class R>
json serialize_field(const VectorField<R>& field) {
    json out;
    const char* kind = field.kind();
    out["type"] = kind;
    if (std::string(kind) == "poly_field") {
        const auto* impl = static_cast<const detail::PolyFieldImpl<R>*>(field.impl());
        out["coeffs"] = dump_reals(impl->coefficients());
        if (!field.zeros().empty()) {
            json zeros = json::array();
            for (const auto& z : field.zeros())
                zeros.push_back({{"root", dbl(z.location)}, {"mult", z.multiplicity}});
            out["zeros"] = zeros;
        }
    } else if (std::string(kind) == "product_field") {
        const auto* impl = static_cast<const detail::ProductFieldImpl<R>*>(field.impl());
        out["coefficient"] = dbl(impl->coefficient());
        json factors = json::array();
        for (const auto& z : field.zeros())
            factors.push_back({{"root", dbl(z.location)}, {"mult", z.multiplicity}});
        out["factors"] = factors;
    } else {
        throw ConfigError(std::string("field kind not serializable: ") + kind);
    }
    return out;
}

template <class R>
std::vector<FieldZero<R>> parse_zero_list(const json& j, const std::string& path) {
    std::vector<FieldZero<R>> out;
    for (std::size_t i = 0; i < j.size(); ++i) {
        const json& z = j[i];
        std::string zp = path + "[" + std::to_string(i) + "]";
        check_keys(z, {"root", "mult"}, zp);
        out.push_back({real_traits<R>::from_double(need(z, "root", zp).get<double>()),
                       need(z, "mult", zp).get<int>()});
    }
    return out;
}

template <class R>
VectorField<R> parse_field(const json& j, const std::string& path) {
    std::string type = need(j, "type", path).get<std::string>();
    if (type == "poly_field") {
        check_keys(j, {"type", "coeffs", "zeros"}, path);
        std::vector<FieldZero<R>> zeros;
        if (j.contains("zeros")) zeros = parse_zero_list<R>(j["zeros"], path + ".zeros");
        return VectorField<R>::poly(parse_reals<R>(need(j, "coeffs", path), path + ".coeffs"),
                                    std::move(zeros));
    }
    if (type == "product_field") {
        check_keys(j, {"type", "coefficient", "factors"}, path);
        return VectorField<R>::product(
            real_traits<R>::from_double(need(j, "coefficient", path).get<double>()),
            parse_zero_list<R>(need(j, "factors", path), path + ".factors"));
    }
    throw ConfigError(path + ".type: unknown field type '" + type + "'");
}

// ---------------------------------------------------------------------------
// surgery pieces
// ---------------------------------------------------------------------------

template <class R>
json serialize_phi(const PhiSpec<R>& spec) {
    json out;
    if (spec.kind == PhiSpec<R>::Kind::bump) {
        out["type"] = "bump";
        out["amplitude"] = dbl(spec.amplitude);
        out["center"] = dbl(spec.center);
        out["width"] = dbl(spec.width);
        out["order"] = spec.order == BumpOrder::C1 ? "c1" : "c2";
    } else {
        out["type"] = "sampled";
        out["samples"] = dump_reals(spec.samples);
        out["gap_center"] = dbl(spec.gap_center);
        out["gap_half_width"] = dbl(spec.gap_half_width);
    }
    return out;
}

template <class R>
PhiSpec<R> parse_phi(const json& j, const std::string& path) {
    PhiSpec<R> spec;
    std::string type = need(j, "type", path).get<std::string>();
    if (type == "bump") {
        check_keys(j, {"type", "amplitude", "center", "width", "order"}, path);
        spec.kind = PhiSpec<R>::Kind::bump;
        spec.amplitude = real_traits<R>::from_double(need(j, "amplitude", path).get<double>());
        spec.center = real_traits<R>::from_double(
            j.contains("center") ? j["center"].get<double>() : 0.5);
        spec.width =
            real_traits<R>::from_double(j.contains("width") ? j["width"].get<double>() : 0.45);
        std::string ord = j.contains("order") ? j["order"].get<std::string>() : "c2";
        if (ord != "c1" && ord != "c2") throw ConfigError(path + ".order: expected c1 or c2");
        spec.order = ord == "c1" ? BumpOrder::C1 : BumpOrder::C2;
    } else if (type == "sampled") {
        check_keys(j, {"type", "samples", "gap_center", "gap_half_width"}, path);
        spec.kind = PhiSpec<R>::Kind::sampled;
        spec.samples = parse_reals<R>(need(j, "samples", path), path + ".samples");
        spec.gap_center = real_traits<R>::from_double(need(j, "gap_center", path).get<double>());
        spec.gap_half_width =
            real_traits<R>::from_double(need(j, "gap_half_width", path).get<double>());
    } else {
        throw ConfigError(path + ".type: unknown phi type '" + type + "'");
    }
    return spec;
}

// ---------------------------------------------------------------------------
// expression trees
// ---------------------------------------------------------------------------

template <class R>
json serialize(const Diffeo<R>& f);

namespace detail {

template <class R>
json serialize_bump(const BumpFn<R>& b) {
    return json{{"l0", dbl(b.support_lo())},
                {"l1", dbl(b.plateau_lo())},
                {"r1", dbl(b.plateau_hi())},
                {"r0", dbl(b.support_hi())},
                {"order", b.order() == BumpOrder::C1 ? "c1" : "c2"}};
}

template <class R>
BumpFn<R> parse_bump(const json& j, const std::string& path) {
    check_keys(j, {"l0", "l1", "r1", "r0", "order"}, path);
    std::string ord = need(j, "order", path).get<std::string>();
    if (ord != "c1" && ord != "c2") throw ConfigError(path + ".order: expected c1 or c2");
    return BumpFn<R>::window(real_traits<R>::from_double(need(j, "l0", path).get<double>()),
                             real_traits<R>::from_double(need(j, "l1", path).get<double>()),
                             real_traits<R>::from_double(need(j, "r1", path).get<double>()),
                             real_traits<R>::from_double(need(j, "r0", path).get<double>()),
                             ord == "c1" ? BumpOrder::C1 : BumpOrder::C2);
}

} // namespace detail

template <class R>
json serialize(const Diffeo<R>& f) {
    using namespace detail;
    const DiffeoNode<R>& node = f.node();
    std::string kind = node.kind();
    json out;
    out["type"] = kind;
    if (kind == "identity") {
    } else if (kind == "germ_q") {
        const auto& n = static_cast<const GermQNode<R>&>(node);
        out["family"] = n.family();
        out["lambda"] = dbl(n.lambda());
        out["anchor"] = dbl(n.anchor());
        out["direction"] = n.inverse_direction() ? "inverse" : "forward";
    } else if (kind == "hat_germ_q1") {
        out["lambda"] = dbl(static_cast<const HatGermQ1Node<R>&>(node).lambda());
    } else if (kind == "poly_map") {
        out["coeffs"] = dump_reals(static_cast<const PolyMapNode<R>&>(node).coefficients());
    } else if (kind == "flow_time") {
        const auto& n = static_cast<const FlowTimeNode<R>&>(node);
        out["field"] = serialize_field(n.field());
        out["t"] = dbl(n.time());
    } else if (kind == "compose") {
        json items = json::array();
        for (const auto& item : static_cast<const ComposeNode<R>&>(node).items())
            items.push_back(serialize(item));
        out["items"] = items;
    } else if (kind == "inverse") {
        out["inner"] = serialize(static_cast<const InverseNode<R>&>(node).inner());
    } else if (kind == "int_power") {
        const auto& n = static_cast<const IntPowerNode<R>&>(node);
        out["inner"] = serialize(n.inner());
        out["n"] = n.exponent();
    } else if (kind == "blend") {
        const auto& n = static_cast<const BlendNode<R>&>(node);
        out["f"] = serialize(n.base());
        out["g"] = serialize(n.graft());
        out["bump"] = serialize_bump(n.bump());
    } else if (kind == "homothety_conj") {
        const auto& n = static_cast<const HomothetyConjNode<R>&>(node);
        out["inner"] = serialize(n.inner());
        out["scale"] = dbl(n.scale());
        out["anchor"] = dbl(n.anchor());
    } else if (kind == "piecewise_glue") {
        const auto& n = static_cast<const PiecewiseGlueNode<R>&>(node);
        out["breakpoints"] = dump_reals(n.breakpoints());
        json pieces = json::array();
        for (const auto& piece : n.pieces()) pieces.push_back(serialize(piece));
        out["pieces"] = pieces;
    } else if (kind == "bernstein_map") {
        const auto& n = static_cast<const BernsteinMapNode<R>&>(node);
        out["eps"] = dbl(n.eps());
        out["anchor_value"] = dbl(n.anchor_value());
        out["deriv_samples"] = dump_reals(n.deriv_samples());
    } else if (kind == "chart_flow") {
        const auto& n = static_cast<const ChartFlowNode<R>&>(node);
        out["base"] = serialize(n.chart().map());
        out["lo"] = dbl(n.chart().lo());
        out["hi"] = dbl(n.chart().hi());
        out["side"] = n.chart().side() == ChartSide::lower ? "lower" : "upper";
        out["p"] = dbl(n.chart().base_point());
        out["t"] = dbl(n.time());
    } else if (kind == "power_conjugacy") {
        const auto& n = static_cast<const PowerConjugacyNode<R>&>(node);
        out["base"] = serialize(n.chart().map());
        out["p"] = dbl(n.chart().base_point());
        out["k"] = n.exponent();
    } else if (kind == "mather_surgery") {
        const auto& n = static_cast<const MatherSurgeryNode<R>&>(node);
        out["base"] = serialize(n.base());
        out["p"] = dbl(n.chart().base_point());
        json pieces = json::array();
        for (const auto& placed : n.pieces())
            pieces.push_back(
                json{{"alpha", dbl(placed.alpha)}, {"phi", serialize_phi(placed.piece.spec)}});
        out["pieces"] = pieces;
    } else if (kind == "amplifier") {
        const auto& n = static_cast<const AmplifierNode<R>&>(node);
        const AmplifierSpec<R>& s = n.spec();
        out["base"] = serialize(n.base());
        out["spec"] = json{{"delta", {dbl(s.delta_lo), dbl(s.delta_hi)}},
                           {"j1", {dbl(s.j1_lo), dbl(s.j1_hi)}},
                           {"j2", {dbl(s.j2_lo), dbl(s.j2_hi)}},
                           {"mu1", dbl(s.mu1)},
                           {"mu2", dbl(s.mu2)},
                           {"dh_p2", dbl(s.dh_p2)},
                           {"dh_p4", dbl(s.dh_p4)},
                           {"eps", dbl(s.eps)},
                           {"depth", s.depth}};
    } else {
        throw ConfigError(std::string("tree kind not serializable: ") + kind);
    }
    return out;
}

template <class R>
Diffeo<R> parse_diffeo(const json& j, const std::string& path = "tree") {
    auto real = [](const json& v) { return real_traits<R>::from_double(v.get<double>()); };
    std::string type = need(j, "type", path).get<std::string>();
    if (type == "identity") {
        check_keys(j, {"type"}, path);
        return identity<R>();
    }
    if (type == "germ_q") {
        check_keys(j, {"type", "family", "lambda", "anchor", "direction"}, path);
        GermDirection dir = GermDirection::forward;
        if (j.contains("direction")) {
            std::string d = j["direction"].get<std::string>();
            if (d != "forward" && d != "inverse")
                throw ConfigError(path + ".direction: expected forward or inverse");
            if (d == "inverse") dir = GermDirection::inverse;
        }
        R anchor = j.contains("anchor") ? real(j["anchor"]) : R(0);
        return germ_q<R>(need(j, "family", path).get<int>(), real(need(j, "lambda", path)), anchor,
                         dir);
    }
    if (type == "hat_germ_q1") {
        check_keys(j, {"type", "lambda"}, path);
        return hat_germ_q1<R>(real(need(j, "lambda", path)));
    }
    if (type == "poly_map") {
        check_keys(j, {"type", "coeffs"}, path);
        return poly_map<R>(parse_reals<R>(need(j, "coeffs", path), path + ".coeffs"));
    }
    if (type == "flow_time") {
        check_keys(j, {"type", "field", "t"}, path);
        return flow_from_field<R>(parse_field<R>(need(j, "field", path), path + ".field"),
                                  real(need(j, "t", path)));
    }
    if (type == "compose") {
        check_keys(j, {"type", "items"}, path);
        std::vector<Diffeo<R>> items;
        const json& arr = need(j, "items", path);
        for (std::size_t i = 0; i < arr.size(); ++i)
            items.push_back(parse_diffeo<R>(arr[i], path + ".items[" + std::to_string(i) + "]"));
        return compose(std::move(items));
    }
    if (type == "inverse") {
        check_keys(j, {"type", "inner"}, path);
        return inverse_of(parse_diffeo<R>(need(j, "inner", path), path + ".inner"));
    }
    if (type == "int_power") {
        check_keys(j, {"type", "inner", "n"}, path);
        return int_power(parse_diffeo<R>(need(j, "inner", path), path + ".inner"),
                         need(j, "n", path).get<long>());
    }
    if (type == "blend") {
        check_keys(j, {"type", "f", "g", "bump"}, path);
        return blend(parse_diffeo<R>(need(j, "f", path), path + ".f"),
                     parse_diffeo<R>(need(j, "g", path), path + ".g"),
                     detail::parse_bump<R>(need(j, "bump", path), path + ".bump"));
    }
    if (type == "homothety_conj") {
        check_keys(j, {"type", "inner", "scale", "anchor"}, path);
        R anchor = j.contains("anchor") ? real(j["anchor"]) : R(0);
        return homothety_conj(parse_diffeo<R>(need(j, "inner", path), path + ".inner"),
                              real(need(j, "scale", path)), anchor);
    }
    if (type == "piecewise_glue") {
        check_keys(j, {"type", "breakpoints", "pieces"}, path);
        std::vector<Diffeo<R>> pieces;
        const json& arr = need(j, "pieces", path);
        for (std::size_t i = 0; i < arr.size(); ++i)
            pieces.push_back(parse_diffeo<R>(arr[i], path + ".pieces[" + std::to_string(i) + "]"));
        return piecewise_glue(
            parse_reals<R>(need(j, "breakpoints", path), path + ".breakpoints"),
            std::move(pieces));
    }
    if (type == "bernstein_map") {
        check_keys(j, {"type", "eps", "anchor_value", "deriv_samples"}, path);
        return Diffeo<R>(std::make_shared<detail::BernsteinMapNode<R>>(
            real(need(j, "eps", path)), real(need(j, "anchor_value", path)),
            parse_reals<R>(need(j, "deriv_samples", path), path + ".deriv_samples")));
    }
    if (type == "chart_flow") {
        check_keys(j, {"type", "base", "lo", "hi", "side", "p", "t"}, path);
        Diffeo<R> base = parse_diffeo<R>(need(j, "base", path), path + ".base");
        R lo = j.contains("lo") ? real(j["lo"]) : R(0);
        R hi = j.contains("hi") ? real(j["hi"]) : R(1);
        std::string side = need(j, "side", path).get<std::string>();
        if (side != "lower" && side != "upper")
            throw ConfigError(path + ".side: expected lower or upper");
        return flow_time(base, lo, hi, side == "lower" ? ChartSide::lower : ChartSide::upper,
                         real(need(j, "p", path)), real(need(j, "t", path)));
    }
    if (type == "power_conjugacy") {
        check_keys(j, {"type", "base", "p", "k"}, path);
        Diffeo<R> base = parse_diffeo<R>(need(j, "base", path), path + ".base");
        return conjugacy_from_flows(base, need(j, "k", path).get<long>(),
                                    real(need(j, "p", path)));
    }
    if (type == "mather_surgery") {
        check_keys(j, {"type", "base", "p", "pieces"}, path);
        Diffeo<R> base = parse_diffeo<R>(need(j, "base", path), path + ".base");
        std::vector<std::pair<SupportedCircleDiffeo<R>, R>> list;
        const json& arr = need(j, "pieces", path);
        for (std::size_t i = 0; i < arr.size(); ++i) {
            std::string pp = path + ".pieces[" + std::to_string(i) + "]";
            check_keys(arr[i], {"alpha", "phi"}, pp);
            list.emplace_back(
                piece_from_spec(parse_phi<R>(need(arr[i], "phi", pp), pp + ".phi")),
                real(need(arr[i], "alpha", pp)));
        }
        return multi_surgery(base, std::move(list), real(need(j, "p", path)));
    }
    if (type == "amplifier") {
        check_keys(j, {"type", "base", "spec"}, path);
        Diffeo<R> base = parse_diffeo<R>(need(j, "base", path), path + ".base");
        const json& s = need(j, "spec", path);
        check_keys(s, {"delta", "j1", "j2", "mu1", "mu2", "dh_p2", "dh_p4", "eps", "depth"},
                   path + ".spec");
        AmplifierSpec<R> spec;
        spec.delta_lo = real(need(s, "delta", path)[0]);
        spec.delta_hi = real(s["delta"][1]);
        spec.j1_lo = real(need(s, "j1", path)[0]);
        spec.j1_hi = real(s["j1"][1]);
        spec.j2_lo = real(need(s, "j2", path)[0]);
        spec.j2_hi = real(s["j2"][1]);
        spec.mu1 = real(need(s, "mu1", path));
        spec.mu2 = real(need(s, "mu2", path));
        spec.dh_p2 = real(need(s, "dh_p2", path));
        spec.dh_p4 = real(need(s, "dh_p4", path));
        spec.eps = real(need(s, "eps", path));
        long depth = need(s, "depth", path).get<long>();
        AmplifierBuild<R> build = make_amplifier(base, spec);
        return distortion_amplifier(base, build, depth);
    }
    throw ConfigError(path + ".type: unknown tree type '" + type + "'");
}

} // namespace parabolica
