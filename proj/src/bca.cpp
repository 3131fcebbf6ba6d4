#include "bcakit/bca.hpp"
#include "bcakit/rng.hpp"

#include "linalg.hpp"

#include <algorithm>
#include <functional>
#include <sstream>

namespace bca {

namespace {

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
    std::string r;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) r += sep;
        r += parts[i];
    }
    return r;
}

bool grlex_mono_less(const Expvec& a, const Expvec& b) { return GrlexLess{}(a, b); }

// keep only componentwise-minimal generators, sorted, deduplicated
std::vector<Expvec> minimalize_gens(std::vector<Expvec> gens) {
    std::sort(gens.begin(), gens.end(), grlex_mono_less);
    gens.erase(std::unique(gens.begin(), gens.end()), gens.end());
    std::vector<Expvec> out;
    for (const auto& g : gens) {
        bool dominated = false;
        for (const auto& h : out)
            if (h != g && expvec_leq(h, g)) {
                dominated = true;
                break;
            }
        if (!dominated) out.push_back(g);
    }
    return out;
}

bool mono_in_ideal(const std::vector<Expvec>& gens, const Expvec& m) {
    for (const auto& g : gens)
        if (expvec_leq(g, m)) return true;
    return false;
}

// standard monomials of a monomial ideal with pure powers in every variable
std::vector<Expvec> standard_monomials(int nvars, const std::vector<Expvec>& gens) {
    Expvec caps(nvars, 0);
    for (int v = 0; v < nvars; ++v) {
        std::int32_t cap = -1;
        for (const auto& g : gens) {
            bool pure = g[v] > 0;
            for (int w = 0; w < nvars && pure; ++w)
                if (w != v && g[w] != 0) pure = false;
            if (pure && (cap < 0 || g[v] < cap)) cap = g[v];
        }
        if (cap < 0) throw DomainError("finite length needs a pure power of every variable");
        caps[v] = cap;
    }
    std::vector<Expvec> out;
    Expvec m(nvars, 0);
    std::function<void(int)> walk = [&](int v) {
        if (v == nvars) {
            if (!mono_in_ideal(gens, m)) out.push_back(m);
            return;
        }
        for (m[v] = 0; m[v] < caps[v]; ++m[v]) walk(v + 1);
        m[v] = 0;
    };
    walk(0);
    std::sort(out.begin(), out.end(), grlex_mono_less);
    return out;
}

std::string mono_str(const std::vector<std::string>& vars, const Expvec& m) {
    std::vector<std::string> parts;
    for (std::size_t v = 0; v < vars.size(); ++v) {
        if (m[v] == 0) continue;
        if (m[v] == 1)
            parts.push_back(vars[v]);
        else
            parts.push_back(vars[v] + "^" + std::to_string(m[v]));
    }
    return parts.empty() ? "1" : join(parts, "*");
}

std::string wrap_coeff(const std::string& s) {
    for (std::size_t i = 0; i < s.size(); ++i) {
        char c = s[i];
        if (c == ' ' || c == '+' || c == '*' || c == '/' || (c == '-' && i > 0))
            return "(" + s + ")";
    }
    return s;
}

// coordinate action of one multiplication matrix (rows are images of basis
// vectors): out_j = sum_i act[i][j] x_i
std::vector<LaurentElement> apply_act(const std::vector<std::vector<Scalar>>& act,
                                      const std::vector<LaurentElement>& x,
                                      const TlfDescriptor& K) {
    std::vector<LaurentElement> out(x.size(), LaurentElement::zero(K));
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i].is_zero()) continue;
        for (std::size_t j = 0; j < x.size(); ++j) {
            if (act[i][j].is_zero()) continue;
            out[j] = out[j] + x[i].scale(act[i][j]);
        }
    }
    return out;
}

std::vector<Scalar> vec_act(const std::vector<std::vector<Scalar>>& act,
                            const std::vector<Scalar>& x, const FieldPtr& f) {
    std::vector<Scalar> out(x.size(), Scalar::zero(f));
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i].is_zero()) continue;
        for (std::size_t j = 0; j < x.size(); ++j)
            if (!act[i][j].is_zero()) out[j] = out[j] + act[i][j] * x[i];
    }
    return out;
}

bool is_unit_row(const std::vector<Scalar>& row, int& where) {
    where = -1;
    for (std::size_t i = 0; i < row.size(); ++i) {
        if (row[i].is_zero()) continue;
        if (where >= 0 || !row[i].is_one()) return false;
        where = static_cast<int>(i);
    }
    return where >= 0;
}

} // namespace

// --- ArtinianBca ---

ArtinianBca ArtinianBca::make(TlfDescriptor K, std::vector<std::string> nilp_vars,
                              std::vector<Expvec> ideal_gens) {
    if (!K.scalars) throw ShapeError("algebra needs a coefficient field");
    auto dirs = K.all_dirs();
    for (std::size_t i = 0; i < nilp_vars.size(); ++i) {
        if (nilp_vars[i].empty()) throw ShapeError("empty variable name");
        for (std::size_t j = 0; j < i; ++j)
            if (nilp_vars[i] == nilp_vars[j]) throw ShapeError("repeated variable " + nilp_vars[i]);
        for (const auto& d : dirs)
            if (d == nilp_vars[i])
                throw ShapeError("variable " + nilp_vars[i] + " collides with the field");
    }
    int r = static_cast<int>(nilp_vars.size());
    for (const auto& g : ideal_gens) {
        if (static_cast<int>(g.size()) != r) throw ShapeError("generator arity mismatch");
        if (expvec_is_zero(g)) throw DomainError("ideal contains 1");
        for (auto e : g)
            if (e < 0) throw ShapeError("negative exponent in an ideal generator");
    }
    if (r == 0 && !ideal_gens.empty()) throw ShapeError("generators without variables");

    ArtinianBca A;
    A.K_ = std::move(K);
    A.nv_ = std::move(nilp_vars);
    A.gens_ = minimalize_gens(std::move(ideal_gens));
    A.basis_ = r == 0 ? std::vector<Expvec>{Expvec{}} : standard_monomials(r, A.gens_);
    return A;
}

int ArtinianBca::nilpotency() const {
    std::int64_t maxdeg = 0;
    for (const auto& m : basis_) maxdeg = std::max(maxdeg, expvec_total(m));
    return static_cast<int>(maxdeg) + 1;
}

bool ArtinianBca::in_ideal(const Expvec& m) const {
    if (static_cast<int>(m.size()) != static_cast<int>(nv_.size()))
        throw ShapeError("monomial arity mismatch");
    return mono_in_ideal(gens_, m);
}

int ArtinianBca::basis_index(const Expvec& m) const {
    for (std::size_t i = 0; i < basis_.size(); ++i)
        if (basis_[i] == m) return static_cast<int>(i);
    return -1;
}

std::string ArtinianBca::mono_string(const Expvec& m) const { return mono_str(nv_, m); }

bool ArtinianBca::equals(const ArtinianBca& o) const {
    return K_ == o.K_ && nv_ == o.nv_ && gens_ == o.gens_;
}

std::string ArtinianBca::to_string() const {
    if (nv_.empty()) return K_.to_string();
    std::vector<std::string> gs;
    for (const auto& g : gens_) gs.push_back(mono_str(nv_, g));
    return K_.to_string() + "[" + join(nv_, ",") + "]/(" + join(gs, ", ") + ")";
}

// --- BcaElement ---

BcaElement BcaElement::zero(const ArtinianBca& A) {
    BcaElement e;
    e.A_ = A;
    e.c_.assign(A.length(), LaurentElement::zero(A.tlf()));
    return e;
}

BcaElement BcaElement::one(const ArtinianBca& A) {
    return coeff(A, LaurentElement::one(A.tlf()));
}

BcaElement BcaElement::coeff(const ArtinianBca& A, LaurentElement lambda) {
    if (lambda.tlf() != A.tlf()) throw FieldMismatch("coefficient lives over the wrong field");
    BcaElement e = zero(A);
    e.c_[0] = std::move(lambda); // basis is sorted by degree, slot 0 is 1
    return e;
}

BcaElement BcaElement::nilp_var(const ArtinianBca& A, const std::string& v) {
    int vi = -1;
    for (std::size_t i = 0; i < A.nilp_vars().size(); ++i)
        if (A.nilp_vars()[i] == v) vi = static_cast<int>(i);
    if (vi < 0) throw ShapeError("unknown variable " + v);
    Expvec m(A.nilp_vars().size(), 0);
    m[vi] = 1;
    BcaElement e = zero(A);
    int idx = A.basis_index(m);
    if (idx >= 0) e.c_[idx] = LaurentElement::one(A.tlf());
    return e;
}

BcaElement BcaElement::from_coords(const ArtinianBca& A, std::vector<LaurentElement> c) {
    if (static_cast<int>(c.size()) != A.length()) throw ShapeError("coordinate count mismatch");
    for (const auto& x : c)
        if (x.tlf() != A.tlf()) throw FieldMismatch("coordinate lives over the wrong field");
    BcaElement e;
    e.A_ = A;
    e.c_ = std::move(c);
    return e;
}

bool BcaElement::is_zero() const {
    for (const auto& x : c_)
        if (!x.is_zero()) return false;
    return true;
}

bool BcaElement::is_nilpotent() const { return c_[0].is_term_free(); }

BcaElement BcaElement::operator+(const BcaElement& o) const {
    if (A_ != o.A_) throw FieldMismatch("elements of different algebras");
    BcaElement r = *this;
    for (std::size_t i = 0; i < c_.size(); ++i) r.c_[i] = c_[i] + o.c_[i];
    return r;
}

BcaElement BcaElement::operator-(const BcaElement& o) const { return *this + (-o); }

BcaElement BcaElement::operator-() const {
    BcaElement r = *this;
    for (auto& x : r.c_) x = -x;
    return r;
}

BcaElement BcaElement::operator*(const BcaElement& o) const {
    if (A_ != o.A_) throw FieldMismatch("elements of different algebras");
    BcaElement r = zero(A_);
    const auto& basis = A_.basis();
    for (std::size_t i = 0; i < c_.size(); ++i) {
        if (c_[i].is_zero()) continue;
        for (std::size_t j = 0; j < o.c_.size(); ++j) {
            if (o.c_[j].is_zero()) continue;
            int k = A_.basis_index(expvec_add(basis[i], basis[j]));
            if (k < 0) continue;
            r.c_[k] = r.c_[k] + c_[i] * o.c_[j];
        }
    }
    return r;
}

BcaElement BcaElement::scale(const LaurentElement& x) const {
    BcaElement r = *this;
    for (auto& c : r.c_) c = c * x;
    return r;
}

BcaElement BcaElement::pow(int n) const {
    if (n < 0) throw DomainError("negative power of an algebra element");
    BcaElement r = one(A_);
    for (int i = 0; i < n; ++i) r = r * *this;
    return r;
}

bool BcaElement::operator==(const BcaElement& o) const { return A_ == o.A_ && c_ == o.c_; }

std::string BcaElement::to_string() const {
    std::vector<std::string> parts;
    for (std::size_t i = 0; i < c_.size(); ++i) {
        if (c_[i].is_term_free() && c_[i].is_exact()) continue;
        std::string cs = c_[i].to_string();
        std::string ms = A_.mono_string(A_.basis()[i]);
        if (i == 0)
            parts.push_back(cs);
        else if (cs == "1")
            parts.push_back(ms);
        else if (cs == "-1")
            parts.push_back("-" + ms);
        else
            parts.push_back(wrap_coeff(cs) + "*" + ms);
    }
    return parts.empty() ? "0" : join(parts, " + ");
}

// --- CoeffField ---

CoeffField CoeffField::canonical(ArtinianBca A) {
    CoeffField s;
    s.A_ = std::move(A);
    return s;
}

CoeffField CoeffField::make(ArtinianBca A, std::map<std::string, BcaElement> eps) {
    CoeffField s;
    s.A_ = std::move(A);
    auto dirs = s.A_.tlf().all_dirs();
    for (auto& [v, e] : eps) {
        if (std::find(dirs.begin(), dirs.end(), v) == dirs.end())
            throw DomainError("no differential direction named " + v);
        if (e.algebra() != s.A_) throw FieldMismatch("correction lives in the wrong algebra");
        if (!e.is_nilpotent()) throw DomainError("section corrections must be nilpotent");
        if (e.is_zero()) continue;
        s.eps_.emplace(v, std::move(e));
    }
    if (!s.eps_.empty()) {
        std::int64_t p = s.A_.tlf().scalars->characteristic();
        if (p != 0 && p <= s.A_.nilpotency())
            throw DomainError("characteristic too small for Taylor transport");
    }
    return s;
}

BcaElement CoeffField::eps(const std::string& dir) const {
    auto it = eps_.find(dir);
    return it == eps_.end() ? BcaElement::zero(A_) : it->second;
}

BcaElement CoeffField::apply(const LaurentElement& lambda) const {
    if (lambda.tlf() != A_.tlf()) throw FieldMismatch("coefficient lives over the wrong field");
    BcaElement r = BcaElement::coeff(A_, lambda);
    if (eps_.empty()) return r;
    const FieldPtr& f = A_.tlf().scalars;
    int maxdeg = A_.nilpotency() - 1;
    std::vector<std::string> ds;
    std::vector<BcaElement> es;
    for (const auto& [v, e] : eps_) {
        ds.push_back(v);
        es.push_back(e);
    }
    // sum over multi-indices beta: (d^beta lambda / beta!) eps^beta
    std::function<void(std::size_t, LaurentElement, BcaElement, int)> walk =
        [&](std::size_t i, LaurentElement der, BcaElement pw, int used) {
            if (i == ds.size()) {
                if (used > 0) r = r + pw.scale(der);
                return;
            }
            walk(i + 1, der, pw, used);
            LaurentElement cur = der;
            BcaElement curp = pw;
            for (int k = 1; used + k <= maxdeg; ++k) {
                cur = cur.derive(ds[i]).scale(Scalar::of_int(f, k).inv());
                curp = curp * es[i];
                if (curp.is_zero()) break;
                walk(i + 1, cur, curp, used + k);
            }
        };
    walk(0, lambda, BcaElement::one(A_), 0);
    return r;
}

bool CoeffField::equals(const CoeffField& o) const { return A_ == o.A_ && eps_ == o.eps_; }

std::string CoeffField::to_string() const {
    if (eps_.empty()) return "canonical section";
    std::vector<std::string> parts;
    for (const auto& [v, e] : eps_) parts.push_back(v + " -> " + v + " + " + e.to_string());
    return "section(" + join(parts, ", ") + ")";
}

// --- FinLenModule ---

FinLenModule FinLenModule::cyclic_sum(ArtinianBca A,
                                      std::vector<std::vector<Expvec>> summand_ideals) {
    if (summand_ideals.empty()) throw ShapeError("a module needs at least one summand");
    int r = static_cast<int>(A.nilp_vars().size());
    const FieldPtr& f = A.tlf().scalars;
    std::vector<std::vector<Expvec>> sb;
    for (auto& J : summand_ideals) {
        std::vector<Expvec> combined = A.ideal_gens();
        for (auto& g : J) {
            if (static_cast<int>(g.size()) != r) throw ShapeError("generator arity mismatch");
            if (expvec_is_zero(g)) throw DomainError("summand ideal contains 1");
            combined.push_back(g);
        }
        combined = minimalize_gens(std::move(combined));
        sb.push_back(r == 0 ? std::vector<Expvec>{Expvec{}} : standard_monomials(r, combined));
    }

    struct Item {
        int s;
        Expvec m;
    };
    std::vector<Item> items;
    for (std::size_t s = 0; s < sb.size(); ++s)
        for (const auto& m : sb[s]) items.push_back({static_cast<int>(s), m});
    std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) {
        auto ta = expvec_total(a.m), tb = expvec_total(b.m);
        if (ta != tb) return ta < tb;
        if (LexLess{}(a.m, b.m)) return true;
        if (LexLess{}(b.m, a.m)) return false;
        return a.s < b.s;
    });
    int n = static_cast<int>(items.size());
    auto find = [&](int s, const Expvec& m) {
        for (int i = 0; i < n; ++i)
            if (items[i].s == s && items[i].m == m) return i;
        return -1;
    };

    std::vector<ScalarMat> act(r, mat_zero(f, n, n));
    for (int v = 0; v < r; ++v)
        for (int i = 0; i < n; ++i) {
            Expvec m2 = items[i].m;
            ++m2[v];
            int j = std::find(sb[items[i].s].begin(), sb[items[i].s].end(), m2) ==
                            sb[items[i].s].end()
                        ? -1
                        : find(items[i].s, m2);
            if (j >= 0) act[v][i][j] = Scalar::one(f);
        }

    std::vector<int> ord;
    std::vector<std::string> labels;
    for (const auto& it : items) {
        ord.push_back(static_cast<int>(expvec_total(it.m)));
        std::string lab = mono_str(A.nilp_vars(), it.m);
        if (sb.size() > 1) lab += "[" + std::to_string(it.s) + "]";
        labels.push_back(lab);
    }
    return attach(std::move(A), std::move(ord), std::move(act), std::move(labels),
                  mat_identity(f, n));
}

FinLenModule FinLenModule::regular(ArtinianBca A) { return cyclic_sum(std::move(A), {{}}); }

FinLenModule FinLenModule::attach(ArtinianBca A, std::vector<int> ord, std::vector<ScalarMat> act,
                                  std::vector<std::string> labels, ScalarMat pres) {
    FinLenModule m;
    m.A_ = std::move(A);
    m.ord_ = std::move(ord);
    m.act_ = std::move(act);
    m.labels_ = std::move(labels);
    m.pres_ = std::move(pres);
    return m;
}

// filtration-adapted rebasing used by from_action and dual
FinLenModule FinLenModule::refiltered(const ArtinianBca& A, const std::vector<ScalarMat>& act,
                                      const std::vector<std::string>& labels,
                                      const ScalarMat& pres) {
    const FieldPtr& f = A.tlf().scalars;
    int n = act.empty() ? (pres.empty() ? 0 : static_cast<int>(pres.size()))
                        : static_cast<int>(act[0].size());
    int r = static_cast<int>(act.size());
    if (n == 0)
        return FinLenModule::attach(A, {}, std::vector<ScalarMat>(r), {}, {});

    // m^k M as echelon spans
    std::vector<Echelon> V;
    {
        Echelon full;
        full.field = f;
        full.cols.assign(n, {});
        for (int i = 0; i < n; ++i) {
            std::vector<Scalar> e(n, Scalar::zero(f));
            e[i] = Scalar::one(f);
            full.add(e);
        }
        V.push_back(std::move(full));
    }
    int guard = A.nilpotency();
    while (V.back().rank() > 0) {
        if (static_cast<int>(V.size()) > guard)
            throw ShapeError("action matrices do not respect the nilpotent filtration");
        const Echelon& prev = V.back();
        Echelon next;
        next.field = f;
        next.cols.assign(n, {});
        for (int j = 0; j < prev.rank(); ++j) {
            std::vector<Scalar> w(n, Scalar::zero(f));
            for (int rr = 0; rr < n; ++rr) w[rr] = prev.cols[rr][j];
            for (int v = 0; v < r; ++v) next.add(vec_act(act[v], w, f));
        }
        V.push_back(std::move(next));
    }
    int levels = static_cast<int>(V.size()) - 1; // V[levels] = 0

    // extend upward: basis of V_{k+1} grows to a basis of V_k
    Echelon E;
    E.field = f;
    E.cols.assign(n, {});
    std::vector<std::vector<std::vector<Scalar>>> chosen(levels);
    for (int k = levels - 1; k >= 0; --k)
        for (int j = 0; j < V[k].rank(); ++j) {
            std::vector<Scalar> w(n, Scalar::zero(f));
            for (int rr = 0; rr < n; ++rr) w[rr] = V[k].cols[rr][j];
            if (E.add(w)) chosen[k].push_back(std::move(w));
        }
    if (E.rank() != n) throw ShapeError("filtration does not exhaust the module");

    ScalarMat P;
    std::vector<int> ord;
    for (int k = 0; k < levels; ++k)
        for (auto& w : chosen[k]) {
            P.push_back(std::move(w));
            ord.push_back(k);
        }
    ScalarMat Pinv = mat_inverse(f, P);

    std::vector<ScalarMat> act2(r);
    for (int v = 0; v < r; ++v) act2[v] = mat_mul(mat_mul(P, act[v]), Pinv);
    std::vector<std::string> labels2;
    for (int j = 0; j < n; ++j) {
        int where = -1;
        if (is_unit_row(P[j], where) && where < static_cast<int>(labels.size()))
            labels2.push_back(labels[where]);
        else
            labels2.push_back("v" + std::to_string(j));
    }
    return attach(A, std::move(ord), std::move(act2), std::move(labels2), mat_mul(P, pres));
}

FinLenModule FinLenModule::from_action(ArtinianBca A,
                                       std::vector<std::vector<std::vector<Scalar>>> act,
                                       std::vector<std::string> labels) {
    int r = static_cast<int>(A.nilp_vars().size());
    if (static_cast<int>(act.size()) != r) throw ShapeError("one action matrix per variable");
    int n = r == 0 ? static_cast<int>(labels.size()) : static_cast<int>(act[0].size());
    const FieldPtr& f = A.tlf().scalars;
    for (const auto& m : act) {
        if (static_cast<int>(m.size()) != n) throw ShapeError("action matrices must be square");
        for (const auto& row : m) {
            if (static_cast<int>(row.size()) != n)
                throw ShapeError("action matrices must be square");
            for (const auto& c : row)
                if (!c.field()->equals(*f)) throw FieldMismatch("action entry field mismatch");
        }
    }
    for (int v = 0; v < r; ++v)
        for (int w = v + 1; w < r; ++w)
            if (mat_mul(act[v], act[w]) != mat_mul(act[w], act[v]))
                throw ShapeError("action matrices must commute");
    for (const auto& g : A.ideal_gens()) {
        ScalarMat prod = mat_identity(f, n);
        for (int v = 0; v < r; ++v)
            for (std::int32_t k = 0; k < g[v]; ++k) prod = mat_mul(prod, act[v]);
        for (const auto& row : prod)
            for (const auto& c : row)
                if (!c.is_zero()) throw ShapeError("action does not kill the defining ideal");
    }
    if (static_cast<int>(labels.size()) != n) {
        labels.clear();
        for (int i = 0; i < n; ++i) labels.push_back("e" + std::to_string(i));
    }
    return refiltered(A, act, labels, mat_identity(f, n));
}

FinLenModule FinLenModule::dual() const {
    int n = length();
    const FieldPtr& f = A_.tlf().scalars;
    std::vector<ScalarMat> dact(act_.size());
    for (std::size_t v = 0; v < act_.size(); ++v) dact[v] = mat_transpose(act_[v]);
    if (n == 0) {
        for (auto& m : dact) m = mat_zero(f, 0, 0);
        return attach(A_, {}, dact, {}, {});
    }
    std::vector<std::string> dl;
    for (const auto& l : labels_) dl.push_back(l + "*");
    return refiltered(A_, dact, dl, mat_identity(f, n));
}

std::vector<LaurentElement> FinLenModule::act(const BcaElement& a,
                                              const std::vector<LaurentElement>& x) const {
    if (a.algebra() != A_) throw FieldMismatch("element of a different algebra");
    if (static_cast<int>(x.size()) != length()) throw ShapeError("coordinate count mismatch");
    const TlfDescriptor& K = A_.tlf();
    auto r = zero_coords();
    for (int k = 0; k < A_.length(); ++k) {
        const LaurentElement& ak = a.coord(k);
        if (ak.is_zero()) continue;
        std::vector<LaurentElement> y = x;
        const Expvec& m = A_.basis()[k];
        for (std::size_t v = 0; v < m.size(); ++v)
            for (std::int32_t e = 0; e < m[v]; ++e) y = apply_act(act_[v], y, K);
        for (int j = 0; j < length(); ++j) {
            if (y[j].is_zero()) continue;
            r[j] = r[j] + y[j] * ak;
        }
    }
    return r;
}

std::vector<LaurentElement> FinLenModule::zero_coords() const {
    return std::vector<LaurentElement>(length(), LaurentElement::zero(A_.tlf()));
}

std::vector<LaurentElement> FinLenModule::unit_coords(int i) const {
    auto r = zero_coords();
    r.at(i) = LaurentElement::one(A_.tlf());
    return r;
}

bool FinLenModule::equals(const FinLenModule& o) const {
    return A_ == o.A_ && ord_ == o.ord_ && act_ == o.act_;
}

std::string FinLenModule::to_string() const {
    std::vector<std::string> os;
    for (int k : ord_) os.push_back(std::to_string(k));
    return "module of length " + std::to_string(length()) + " over " + A_.to_string() +
           " with orders [" + join(os, ",") + "]";
}

// --- sigma coordinates ---

std::vector<LaurentElement> sigma_coords(const CoeffField& sigma, const FinLenModule& M,
                                         std::vector<LaurentElement> y) {
    if (sigma.algebra() != M.algebra()) throw FieldMismatch("section over a different algebra");
    if (static_cast<int>(y.size()) != M.length()) throw ShapeError("coordinate count mismatch");
    if (sigma.is_canonical()) return y;
    int n = M.length();
    std::vector<LaurentElement> lam(n, LaurentElement::zero(M.algebra().tlf()));
    for (int i = 0; i < n; ++i) {
        lam[i] = y[i];
        if (lam[i].is_zero()) continue;
        auto corr = M.act(sigma.apply(lam[i]), M.unit_coords(i));
        for (int j = 0; j < n; ++j) y[j] = y[j] - corr[j];
    }
    for (const auto& rest : y)
        if (!rest.is_term_free()) throw Error("internal: section expansion did not terminate");
    return lam;
}

// --- dual elements ---

DualElement DualElement::make(FinLenModule M, CoeffField sigma, std::vector<Form> values) {
    if (sigma.algebra() != M.algebra()) throw FieldMismatch("section over a different algebra");
    if (static_cast<int>(values.size()) != M.length()) throw ShapeError("one value per basis vector");
    const TlfDescriptor& K = M.algebra().tlf();
    int top = static_cast<int>(K.all_dirs().size());
    for (const auto& v : values) {
        if (!v.tlf().scalars || v.tlf() != K) throw FieldMismatch("value over the wrong field");
        if (v.degree() != top) throw ShapeError("values must be top forms");
    }
    DualElement d;
    d.M = std::move(M);
    d.sigma = std::move(sigma);
    d.values = std::move(values);
    return d;
}

Form DualElement::eval(const std::vector<LaurentElement>& y) const {
    auto lam = sigma_coords(sigma, M, y);
    const TlfDescriptor& K = M.algebra().tlf();
    Form acc = Form::zero(K, static_cast<int>(K.all_dirs().size()));
    for (std::size_t i = 0; i < lam.size(); ++i) {
        if (lam[i].is_zero()) continue;
        acc = acc + values[i].scale(lam[i]);
    }
    return acc;
}

DualElement DualElement::act(const BcaElement& a) const {
    if (a.algebra() != M.algebra()) throw FieldMismatch("element of a different algebra");
    std::vector<Form> vals;
    for (int i = 0; i < M.length(); ++i) vals.push_back(eval(M.act(a, M.unit_coords(i))));
    return make(M, sigma, std::move(vals));
}

DualElement DualElement::operator+(const DualElement& o) const {
    if (!M.equals(o.M) || !sigma.equals(o.sigma))
        throw FieldMismatch("functionals over different presentations");
    std::vector<Form> vals;
    for (std::size_t i = 0; i < values.size(); ++i) vals.push_back(values[i] + o.values[i]);
    return make(M, sigma, std::move(vals));
}

DualElement DualElement::scale(const LaurentElement& lambda) const {
    std::vector<Form> vals;
    for (const auto& v : values) vals.push_back(v.scale(lambda));
    return make(M, sigma, std::move(vals));
}

bool DualElement::operator==(const DualElement& o) const {
    return M.equals(o.M) && sigma.equals(o.sigma) && values == o.values;
}

Form volume_form(const TlfDescriptor& K) {
    int top = static_cast<int>(K.all_dirs().size());
    DirKey all;
    for (int i = 0; i < top; ++i) all.push_back(i);
    std::map<DirKey, LaurentElement> comps;
    comps.emplace(std::move(all), LaurentElement::one(K));
    return Form::from_components(K, top, std::move(comps));
}

Form residue_pairing(const DualElement& phi, const std::vector<LaurentElement>& x) {
    return phi.eval(x);
}

// --- change of section ---

DiffOpMatrix semilinear_matrix(const CoeffField& sigma, const FinLenModule& M) {
    if (sigma.algebra() != M.algebra()) throw FieldMismatch("section over a different algebra");
    const TlfDescriptor& K = M.algebra().tlf();
    const FieldPtr& f = K.scalars;
    int n = M.length();
    DiffOpMatrix F = DiffOpMatrix::zeros(K, n, n);

    auto dirs = K.all_dirs();
    std::vector<std::string> ds;
    std::vector<BcaElement> es;
    std::vector<int> dpos;
    for (const auto& [v, e] : sigma.eps_all()) {
        ds.push_back(v);
        es.push_back(e);
        dpos.push_back(static_cast<int>(
            std::find(dirs.begin(), dirs.end(), v) - dirs.begin()));
    }
    int maxdeg = M.algebra().nilpotency() - 1;

    for (int i = 0; i < n; ++i) {
        Expvec beta(dirs.size(), 0);
        std::function<void(std::size_t, BcaElement, Scalar, int)> walk =
            [&](std::size_t d, BcaElement pw, Scalar cf, int used) {
                if (d == ds.size()) {
                    auto w = M.act(pw, M.unit_coords(i));
                    for (int k = 0; k < n; ++k) {
                        if (w[k].is_zero()) continue;
                        F.set(k, i, F.at(k, i) + DiffOp::term(w[k].scale(cf), beta));
                    }
                    return;
                }
                walk(d + 1, pw, cf, used);
                BcaElement curp = pw;
                Scalar curc = cf;
                for (int k = 1; used + k <= maxdeg; ++k) {
                    curp = curp * es[d];
                    curc = curc * Scalar::of_int(f, k).inv();
                    if (curp.is_zero()) break;
                    beta[dpos[d]] = k;
                    walk(d + 1, curp, curc, used + k);
                }
                beta[dpos[d]] = 0;
            };
        walk(0, BcaElement::one(M.algebra()), Scalar::one(f), 0);
    }
    return F;
}

DiffOpMatrix dij_matrix(const CoeffField& sigma, const CoeffField& sigma2,
                        const FinLenModule& M) {
    if (sigma.algebra() != sigma2.algebra())
        throw FieldMismatch("sections over different algebras");
    DiffOpMatrix F1 = semilinear_matrix(sigma, M);
    DiffOpMatrix F2 = semilinear_matrix(sigma2, M);
    return F1.inverse_unitriangular() * F2;
}

DualElement psi(const CoeffField& sigma_to, const DualElement& phi) {
    DiffOpMatrix D = dij_matrix(phi.sigma, sigma_to, phi.M);
    const TlfDescriptor& K = phi.M.algebra().tlf();
    int top = static_cast<int>(K.all_dirs().size());
    int n = phi.M.length();
    std::vector<Form> vals;
    for (int i = 0; i < n; ++i) {
        Form acc = Form::zero(K, top);
        for (int j = 0; j < n; ++j) {
            if (D.at(j, i).is_zero()) continue;
            acc = acc + right_action(phi.values[j], D.at(j, i));
        }
        vals.push_back(std::move(acc));
    }
    return DualElement::make(phi.M, sigma_to, std::move(vals));
}

// --- module operators ---

ModuleDO ModuleDO::make(FinLenModule source, FinLenModule target, CoeffField sigma,
                        DiffOpMatrix mat) {
    if (source.algebra() != target.algebra() || sigma.algebra() != source.algebra())
        throw FieldMismatch("operator pieces over different algebras");
    if (mat.rows() != source.length() || mat.cols() != target.length())
        throw ShapeError("operator matrix shape mismatch");
    if (source.length() > 0 || target.length() > 0)
        if (mat.tlf() != source.algebra().tlf())
            throw FieldMismatch("operator matrix over the wrong field");
    ModuleDO d;
    d.source = std::move(source);
    d.target = std::move(target);
    d.sigma = std::move(sigma);
    d.mat = std::move(mat);
    return d;
}

ModuleDO ModuleDO::identity(const FinLenModule& M, const CoeffField& sigma) {
    return make(M, M, sigma, DiffOpMatrix::identity(M.algebra().tlf(), M.length()));
}

ModuleDO ModuleDO::mult(const CoeffField& sigma, const FinLenModule& M, const BcaElement& a) {
    const TlfDescriptor& K = M.algebra().tlf();
    int n = M.length();
    DiffOpMatrix mat = DiffOpMatrix::zeros(K, n, n);
    for (int i = 0; i < n; ++i) {
        auto mu = sigma_coords(sigma, M, M.act(a, M.unit_coords(i)));
        for (int j = 0; j < n; ++j)
            if (!mu[j].is_zero()) mat.set(i, j, DiffOp::of_element(mu[j]));
    }
    return make(M, M, sigma, std::move(mat));
}

ModuleDO ModuleDO::compose(const ModuleDO& later, const ModuleDO& first) {
    if (!first.target.equals(later.source))
        throw ShapeError("operators do not chain");
    if (!first.sigma.equals(later.sigma))
        throw FieldMismatch("operators presented through different sections");
    const TlfDescriptor& K = first.source.algebra().tlf();
    int n0 = first.source.length(), n1 = first.target.length(), n2 = later.target.length();
    DiffOpMatrix mat = DiffOpMatrix::zeros(K, n0, n2);
    for (int i = 0; i < n0; ++i)
        for (int k = 0; k < n2; ++k) {
            DiffOp acc = DiffOp::zero(K);
            for (int j = 0; j < n1; ++j) {
                if (first.mat.at(i, j).is_zero() || later.mat.at(j, k).is_zero()) continue;
                acc = acc + later.mat.at(j, k) * first.mat.at(i, j);
            }
            if (!acc.is_zero()) mat.set(i, k, std::move(acc));
        }
    return make(first.source, later.target, first.sigma, std::move(mat));
}

std::vector<LaurentElement> ModuleDO::apply(const std::vector<LaurentElement>& x) const {
    auto lam = sigma_coords(sigma, source, x);
    const TlfDescriptor& K = source.algebra().tlf();
    auto out = target.zero_coords();
    for (int j = 0; j < target.length(); ++j) {
        LaurentElement mu = LaurentElement::zero(K);
        for (int i = 0; i < source.length(); ++i) {
            if (lam[i].is_zero() || mat.at(i, j).is_zero()) continue;
            mu = mu + mat.at(i, j).apply(lam[i]);
        }
        if (mu.is_zero()) continue;
        auto piece = target.act(sigma.apply(mu), target.unit_coords(j));
        for (int k = 0; k < target.length(); ++k) out[k] = out[k] + piece[k];
    }
    return out;
}

int ModuleDO::order() const {
    int r = -1;
    for (int i = 0; i < mat.rows(); ++i)
        for (int j = 0; j < mat.cols(); ++j) r = std::max(r, mat.at(i, j).order());
    return r;
}

bool ModuleDO::is_zero() const { return mat.is_zero(); }

DualElement dual_of_do(const ModuleDO& D, const DualElement& phi) {
    if (!phi.M.equals(D.target)) throw ShapeError("functional does not live on the target");
    if (!phi.sigma.equals(D.sigma))
        throw FieldMismatch("functional presented through a different section");
    const TlfDescriptor& K = D.source.algebra().tlf();
    int top = static_cast<int>(K.all_dirs().size());
    std::vector<Form> vals;
    for (int i = 0; i < D.source.length(); ++i) {
        Form acc = Form::zero(K, top);
        for (int j = 0; j < D.target.length(); ++j) {
            if (D.mat.at(i, j).is_zero()) continue;
            acc = acc + right_action(phi.values[j], D.mat.at(i, j));
        }
        vals.push_back(std::move(acc));
    }
    return DualElement::make(D.source, D.sigma, std::move(vals));
}

ModuleDO dual_do_module(const ModuleDO& D) {
    if (!D.sigma.is_canonical())
        throw DomainError("module-level dual operators use the canonical section");
    const TlfDescriptor& K = D.source.algebra().tlf();
    const FieldPtr& f = K.scalars;
    int ns = D.source.length(), nt = D.target.length();
    FinLenModule S2 = D.target.dual();
    FinLenModule T2 = D.source.dual();
    const ScalarMat& PN = S2.basis_in_parent();
    const ScalarMat& PM = T2.basis_in_parent();
    ScalarMat PMinv = ns > 0 ? mat_inverse(f, PM) : ScalarMat{};

    std::vector<std::vector<DiffOp>> T(ns, std::vector<DiffOp>(nt, DiffOp::zero(K)));
    for (int i = 0; i < ns; ++i)
        for (int k = 0; k < nt; ++k)
            if (!D.mat.at(i, k).is_zero()) T[i][k] = transpose(D.mat.at(i, k));

    DiffOpMatrix R = DiffOpMatrix::zeros(K, nt, ns);
    for (int j = 0; j < nt; ++j) {
        // W_i = sum_k T_ik after multiplication by the dual-basis entry
        std::vector<DiffOp> W(ns, DiffOp::zero(K));
        for (int i = 0; i < ns; ++i)
            for (int k = 0; k < nt; ++k) {
                if (PN[j][k].is_zero() || T[i][k].is_zero()) continue;
                W[i] = W[i] + T[i][k] * DiffOp::of_element(LaurentElement::constant(K, PN[j][k]));
            }
        for (int l = 0; l < ns; ++l) {
            DiffOp acc = DiffOp::zero(K);
            for (int i = 0; i < ns; ++i) {
                if (PMinv[i][l].is_zero() || W[i].is_zero()) continue;
                acc = acc + W[i].scale(LaurentElement::constant(K, PMinv[i][l]));
            }
            if (!acc.is_zero()) R.set(j, l, std::move(acc));
        }
    }
    return ModuleDO::make(std::move(S2), std::move(T2), D.sigma, std::move(R));
}

DualizingData k_dualizing(const ArtinianBca& A, const CoeffField& sigma) {
    DualizingData d;
    d.M = FinLenModule::regular(A);
    Form vol = volume_form(A.tlf());
    int top = static_cast<int>(A.tlf().all_dirs().size());
    for (int i = 0; i < d.M.length(); ++i) {
        std::vector<Form> vals(d.M.length(), Form::zero(A.tlf(), top));
        vals[i] = vol;
        d.dual_basis.push_back(DualElement::make(d.M, sigma, std::move(vals)));
    }
    return d;
}

// --- morphisms and traces ---

BcaMorphism BcaMorphism::make(ArtinianBca source, ArtinianBca target,
                              std::vector<MorphismStep> tower, std::vector<BcaElement> images) {
    if (tower.empty()) {
        if (source.tlf() != target.tlf())
            throw FieldMismatch("empty tower between different fields");
    } else {
        if (tower.front().source != source.tlf())
            throw FieldMismatch("tower does not start at the source field");
        for (std::size_t i = 0; i + 1 < tower.size(); ++i)
            if (tower[i].target != tower[i + 1].source)
                throw FieldMismatch("tower steps do not chain");
        if (tower.back().target != target.tlf())
            throw FieldMismatch("tower does not end at the target field");
    }
    if (images.size() != source.nilp_vars().size())
        throw ShapeError("one image per source variable");
    for (const auto& im : images) {
        if (im.algebra() != target) throw FieldMismatch("image lives in the wrong algebra");
        if (!im.is_nilpotent()) throw DomainError("variable images must be nilpotent");
    }
    BcaMorphism f;
    f.source = std::move(source);
    f.target = std::move(target);
    f.tower = std::move(tower);
    f.images = std::move(images);
    for (const auto& g : f.source.ideal_gens()) {
        BcaElement p = f.apply_mono(g);
        for (const auto& c : p.coords())
            if (!c.is_term_free())
                throw DomainError("images do not satisfy the defining relations");
    }
    return f;
}

BcaElement BcaMorphism::apply_mono(const Expvec& m) const {
    BcaElement p = BcaElement::one(target);
    for (std::size_t v = 0; v < m.size(); ++v) p = p * images[v].pow(m[v]);
    return p;
}

BcaElement BcaMorphism::apply(const BcaElement& a) const {
    if (a.algebra() != source) throw FieldMismatch("element of a different algebra");
    BcaElement r = BcaElement::zero(target);
    for (int k = 0; k < source.length(); ++k) {
        const LaurentElement& c = a.coord(k);
        if (c.is_zero()) continue;
        LaurentElement cB = tower.empty() ? c : apply_tower(c, tower, Window::exact_marker());
        r = r + apply_mono(source.basis()[k]).scale(cB);
    }
    return r;
}

BcaMorphism BcaMorphism::compose(const BcaMorphism& later, const BcaMorphism& first) {
    if (first.target != later.source) throw FieldMismatch("morphisms do not chain");
    std::vector<MorphismStep> tower = first.tower;
    tower.insert(tower.end(), later.tower.begin(), later.tower.end());
    std::vector<BcaElement> images;
    for (const auto& im : first.images) images.push_back(later.apply(im));
    return make(first.source, later.target, std::move(tower), std::move(images));
}

DualElement trace_map(const BcaMorphism& f, const CoeffField& sigma, const DualElement& phi) {
    if (sigma.algebra() != f.source) throw FieldMismatch("section over a different algebra");
    FinLenModule regB = FinLenModule::regular(f.target);
    if (!phi.M.equals(regB))
        throw DomainError("traces take functionals on the regular module of the target");
    if (!sigma.is_canonical())
        for (const auto& s : f.tower)
            if (s.kind != MorphismStep::Kind::Laurent)
                throw DomainError("twisted sections need towers of Laurent extensions");

    std::map<std::string, BcaElement> teps;
    for (const auto& [v, e] : sigma.eps_all()) teps.emplace(v, f.apply(e));
    CoeffField tau = CoeffField::make(f.target, std::move(teps));

    DualElement moved = psi(tau, phi);
    std::vector<Form> vals;
    for (int i = 0; i < f.source.length(); ++i) {
        BcaElement x = f.apply_mono(f.source.basis()[i]);
        vals.push_back(res_tower_form(moved.eval(x.coords()), f.tower));
    }
    return DualElement::make(FinLenModule::regular(f.source), sigma, std::move(vals));
}

// --- twisted inverse image on modules ---

FinLenModule f_sharp(const BcaMorphism& f, const FinLenModule& M) {
    if (!f.tower.empty())
        throw DomainError("module transfer needs a morphism over the same field");
    if (M.algebra() != f.source) throw FieldMismatch("module over a different algebra");
    const ArtinianBca& B = f.target;
    const TlfDescriptor& K = B.tlf();
    const FieldPtr& fl = K.scalars;

    // images must be plain monomials (coefficient one) or zero
    std::vector<int> img(f.images.size(), -1);
    for (std::size_t v = 0; v < f.images.size(); ++v) {
        int hits = 0;
        for (int k = 0; k < B.length(); ++k) {
            const LaurentElement& c = f.images[v].coord(k);
            if (c.is_zero()) continue;
            if (c != LaurentElement::one(K))
                throw DomainError("module transfer needs monomial variable images");
            img[v] = k;
            ++hits;
        }
        if (hits > 1) throw DomainError("module transfer needs monomial variable images");
    }

    FinLenModule Md = M.dual();
    int n = Md.length(), nb = B.length();
    int dim = nb * n;
    auto at = [&](int b, int j) { return b * n + j; };

    Echelon E;
    E.field = fl;
    E.cols.assign(dim, {});
    int r = static_cast<int>(f.source.nilp_vars().size());
    for (int v = 0; v < r; ++v)
        for (int b = 0; b < nb; ++b)
            for (int j = 0; j < n; ++j) {
                std::vector<Scalar> rel(dim, Scalar::zero(fl));
                if (img[v] >= 0) {
                    int b2 = B.basis_index(expvec_add(B.basis()[b], B.basis()[img[v]]));
                    if (b2 >= 0) rel[at(b2, j)] = rel[at(b2, j)] + Scalar::one(fl);
                }
                for (int l = 0; l < n; ++l)
                    if (!Md.action(v)[j][l].is_zero())
                        rel[at(b, l)] = rel[at(b, l)] - Md.action(v)[j][l];
                E.add(rel);
            }
    std::vector<int> np;
    {
        std::size_t pi = 0;
        for (int i = 0; i < dim; ++i) {
            if (pi < E.pivots.size() && E.pivots[pi] == i) {
                ++pi;
                continue;
            }
            np.push_back(i);
        }
    }
    int q = static_cast<int>(np.size());

    int rb = static_cast<int>(B.nilp_vars().size());
    std::vector<ScalarMat> acts(rb, mat_zero(fl, q, q));
    for (int w = 0; w < rb; ++w) {
        Expvec ew(rb, 0);
        ew[w] = 1;
        for (int c = 0; c < q; ++c) {
            int b = np[c] / n, j = np[c] % n;
            int b2 = B.basis_index(expvec_add(B.basis()[b], ew));
            if (b2 < 0) continue;
            std::vector<Scalar> free(dim, Scalar::zero(fl));
            free[at(b2, j)] = Scalar::one(fl);
            auto red = E.reduce(free);
            for (int c2 = 0; c2 < q; ++c2) acts[w][c][c2] = red[np[c2]];
        }
    }
    std::vector<std::string> labels;
    for (int c = 0; c < q; ++c) {
        int b = np[c] / n, j = np[c] % n;
        labels.push_back(Md.labels()[j] + "@" + B.mono_string(B.basis()[b]));
    }
    return FinLenModule::from_action(B, acts, labels).dual();
}

// --- de Rham complex ---

namespace {

std::vector<std::vector<int>> subsets_of(int m, int q) {
    std::vector<std::vector<int>> out;
    if (q < 0 || q > m) return out;
    std::vector<int> idx(q);
    for (int i = 0; i < q; ++i) idx[i] = i;
    while (true) {
        out.push_back(idx);
        if (q == 0) break;
        int i = q - 1;
        while (i >= 0 && idx[i] == m - q + i) --i;
        if (i < 0) break;
        ++idx[i];
        for (int j = i + 1; j < q; ++j) idx[j] = idx[j - 1] + 1;
    }
    return out;
}

// insert symbol s into a sorted subset; returns sign, or 0 when already there
int wedge_insert(const std::vector<int>& S, int s, std::vector<int>& out) {
    out.clear();
    int pos = 0;
    while (pos < static_cast<int>(S.size()) && S[pos] < s) ++pos;
    if (pos < static_cast<int>(S.size()) && S[pos] == s) return 0;
    out = S;
    out.insert(out.begin() + pos, s);
    return pos % 2 == 0 ? 1 : -1;
}

} // namespace

DeRhamComplex omega_complex(const ArtinianBca& A, int q_max) {
    const TlfDescriptor& K = A.tlf();
    const FieldPtr& f = K.scalars;
    if (f->characteristic() != 0)
        throw DomainError("the separated de Rham complex is built in characteristic zero");
    if (q_max < 0) throw ShapeError("negative degree bound");
    int r = static_cast<int>(A.nilp_vars().size());
    auto dirs = K.all_dirs();
    int m = static_cast<int>(dirs.size());
    int nsym = r + m; // symbols: variable differentials first, then field directions
    int nA = A.length();

    struct Level {
        std::vector<std::vector<int>> subs;
        std::map<std::vector<int>, int> smap;
        Echelon E;
        std::vector<int> np;
        FinLenModule mod;
        ScalarMat presinv;
    };
    std::vector<Level> lv(q_max + 1);

    CoeffField canon = CoeffField::canonical(A);
    for (int q = 0; q <= q_max; ++q) {
        Level& L = lv[q];
        L.subs = subsets_of(nsym, q);
        for (std::size_t s = 0; s < L.subs.size(); ++s) L.smap[L.subs[s]] = static_cast<int>(s);
        int dim = static_cast<int>(L.subs.size()) * nA;
        L.E.field = f;
        L.E.cols.assign(dim, {});
        auto fidx = [&](int sIdx, int b) { return sIdx * nA + b; };

        if (q >= 1 && dim > 0) {
            auto smaller = subsets_of(nsym, q - 1);
            std::vector<int> ins;
            for (const auto& g : A.ideal_gens())
                for (const auto& Spp : smaller)
                    for (int b = 0; b < nA; ++b) {
                        std::vector<Scalar> rel(dim, Scalar::zero(f));
                        bool any = false;
                        for (int v = 0; v < r; ++v) {
                            if (g[v] == 0) continue;
                            int sign = wedge_insert(Spp, v, ins);
                            if (sign == 0) continue;
                            Expvec m2 = expvec_add(expvec_sub(g, [&] {
                                                       Expvec e(r, 0);
                                                       e[v] = 1;
                                                       return e;
                                                   }()),
                                                   A.basis()[b]);
                            int b2 = A.basis_index(m2);
                            if (b2 < 0) continue;
                            int s2 = L.smap.at(ins);
                            rel[fidx(s2, b2)] =
                                rel[fidx(s2, b2)] + Scalar::of_int(f, sign * g[v]);
                            any = true;
                        }
                        if (any) L.E.add(rel);
                    }
        }
        {
            std::size_t pi = 0;
            for (int i = 0; i < dim; ++i) {
                if (pi < L.E.pivots.size() && L.E.pivots[pi] == i) {
                    ++pi;
                    continue;
                }
                L.np.push_back(i);
            }
        }
        int nq = static_cast<int>(L.np.size());
        std::vector<ScalarMat> acts(r, mat_zero(f, nq, nq));
        for (int v = 0; v < r; ++v) {
            Expvec ev(r, 0);
            ev[v] = 1;
            for (int c = 0; c < nq; ++c) {
                int sIdx = L.np[c] / nA, b = L.np[c] % nA;
                int b2 = A.basis_index(expvec_add(A.basis()[b], ev));
                if (b2 < 0) continue;
                std::vector<Scalar> free(dim, Scalar::zero(f));
                free[fidx(sIdx, b2)] = Scalar::one(f);
                auto red = L.E.reduce(free);
                for (int c2 = 0; c2 < nq; ++c2) acts[v][c][c2] = red[L.np[c2]];
            }
        }
        std::vector<std::string> labels;
        for (int c = 0; c < nq; ++c) {
            int sIdx = L.np[c] / nA, b = L.np[c] % nA;
            std::vector<std::string> ws;
            for (int s : L.subs[sIdx])
                ws.push_back("d" + (s < r ? A.nilp_vars()[s] : dirs[s - r]));
            std::string mono = A.mono_string(A.basis()[b]);
            if (ws.empty())
                labels.push_back(mono);
            else if (mono == "1")
                labels.push_back(join(ws, "^"));
            else
                labels.push_back(mono + "*" + join(ws, "^"));
        }
        L.mod = FinLenModule::from_action(A, acts, labels);
        L.presinv = nq > 0 ? mat_inverse(f, L.mod.basis_in_parent()) : ScalarMat{};
    }

    DeRhamComplex C;
    for (auto& L : lv) C.modules.push_back(L.mod);

    for (int q = 0; q < q_max; ++q) {
        const Level& Lq = lv[q];
        const Level& Ln = lv[q + 1];
        int nq = Lq.mod.length(), nn = Ln.mod.length();
        int dimn = static_cast<int>(Ln.subs.size()) * nA;
        DiffOpMatrix mat = DiffOpMatrix::zeros(K, nq, nn);
        std::vector<int> ins;

        for (int i = 0; i < nq; ++i) {
            // basis vector in free coordinates
            std::vector<Scalar> Y(static_cast<int>(Lq.subs.size()) * nA, Scalar::zero(f));
            for (int c = 0; c < nq; ++c) {
                const Scalar& e = Lq.mod.basis_in_parent()[i][c];
                if (!e.is_zero()) Y[Lq.np[c]] = e;
            }
            std::vector<Scalar> c0(dimn, Scalar::zero(f));
            std::vector<std::vector<Scalar>> wd(m, std::vector<Scalar>(dimn, Scalar::zero(f)));
            for (std::size_t fp = 0; fp < Y.size(); ++fp) {
                if (Y[fp].is_zero()) continue;
                int sIdx = static_cast<int>(fp) / nA, b = static_cast<int>(fp) % nA;
                const auto& S = Lq.subs[sIdx];
                const Expvec& p = A.basis()[b];
                for (int v = 0; v < r; ++v) {
                    if (p[v] == 0) continue;
                    int sign = wedge_insert(S, v, ins);
                    if (sign == 0) continue;
                    Expvec m2 = p;
                    --m2[v];
                    int b2 = A.basis_index(m2);
                    int s2 = Ln.smap.at(ins);
                    c0[s2 * nA + b2] =
                        c0[s2 * nA + b2] + Y[fp] * Scalar::of_int(f, sign * p[v]);
                }
                for (int d = 0; d < m; ++d) {
                    int sign = wedge_insert(S, r + d, ins);
                    if (sign == 0) continue;
                    int s2 = Ln.smap.at(ins);
                    wd[d][s2 * nA + b] = wd[d][s2 * nA + b] + Y[fp] * Scalar::of_int(f, sign);
                }
            }
            auto project = [&](const std::vector<Scalar>& freev) {
                auto red = Ln.E.reduce(freev);
                std::vector<Scalar> comp(nn, Scalar::zero(f));
                for (int c = 0; c < nn; ++c) comp[c] = red[Ln.np[c]];
                std::vector<Scalar> out(nn, Scalar::zero(f));
                for (int c = 0; c < nn; ++c) {
                    if (comp[c].is_zero()) continue;
                    for (int j = 0; j < nn; ++j) out[j] = out[j] + comp[c] * Ln.presinv[c][j];
                }
                return out;
            };
            auto c0m = project(c0);
            std::vector<std::vector<Scalar>> wm;
            for (int d = 0; d < m; ++d) wm.push_back(project(wd[d]));
            for (int j = 0; j < nn; ++j) {
                DiffOp op = DiffOp::zero(K);
                if (!c0m[j].is_zero())
                    op = op + DiffOp::of_element(LaurentElement::constant(K, c0m[j]));
                for (int d = 0; d < m; ++d) {
                    if (wm[d][j].is_zero()) continue;
                    Expvec beta(m, 0);
                    beta[d] = 1;
                    op = op + DiffOp::term(LaurentElement::constant(K, wm[d][j]), beta);
                }
                if (!op.is_zero()) mat.set(i, j, std::move(op));
            }
        }
        C.differentials.push_back(ModuleDO::make(Lq.mod, Ln.mod, canon, std::move(mat)));
    }
    return C;
}

// --- exact invertibility through random evaluation ---

namespace {

Scalar eval_exact_at(const LaurentElement& x, const std::vector<Scalar>& vals) {
    if (!x.is_exact()) throw PrecisionError("invertibility check needs exact coefficients");
    const FieldPtr& f = x.tlf().scalars;
    Scalar acc = Scalar::zero(f);
    for (const auto& [e, c] : x.terms()) {
        Scalar t = c;
        for (std::size_t v = 0; v < e.size(); ++v) {
            if (e[v] == 0) continue;
            Scalar p = e[v] > 0 ? vals[v].pow(e[v]) : vals[v].inv().pow(-e[v]);
            t = t * p;
        }
        acc = acc + t;
    }
    return acc;
}

} // namespace

bool gram_invertible(const TlfDescriptor& K, const std::vector<std::vector<Form>>& gram,
                     std::uint64_t seed) {
    int n = static_cast<int>(gram.size());
    if (n == 0) return true;
    const FieldPtr& f = K.scalars;
    DirKey all;
    for (int i = 0; i < static_cast<int>(K.all_dirs().size()); ++i) all.push_back(i);
    std::vector<std::vector<LaurentElement>> coeff(n);
    for (int i = 0; i < n; ++i) {
        if (static_cast<int>(gram[i].size()) != n) throw ShapeError("pairing matrix not square");
        for (int j = 0; j < n; ++j) coeff[i].push_back(gram[i][j].component(all));
    }
    Rng rng(seed);
    for (int attempt = 0; attempt < 8; ++attempt) {
        std::vector<Scalar> vals;
        for (int v = 0; v < K.dim(); ++v) {
            long long num = rng.uniform(1, 9);
            if (rng.chance(1, 2)) num = -num;
            vals.push_back(Scalar::of_rational(f, Rational(num, rng.uniform(1, 3))));
        }
        ScalarMat mat = mat_zero(f, n, n);
        bool bad = false;
        try {
            for (int i = 0; i < n && !bad; ++i)
                for (int j = 0; j < n; ++j) mat[i][j] = eval_exact_at(coeff[i][j], vals);
        } catch (const DomainError&) {
            bad = true; // unlucky pole in a coefficient; try another point
        }
        if (!bad && mat_invertible(f, mat)) return true;
    }
    return false;
}

} // namespace bca
