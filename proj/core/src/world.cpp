#include "plab/world.hpp"

#include <algorithm>
#include <set>

#include "plab/hash.hpp"
#include "plab/rng.hpp"

namespace plab {

namespace {

const std::vector<std::string> kVerbs = {"shows", "holds", "keeps", "bears", "marks",
                                         "lists", "names", "takes", "gives", "finds",
                                         "sets",  "calls", "sees",  "puts"};
const std::vector<std::string> kCopulas = {"is", "was", "remains", "stays", "stands", "seems"};
const std::vector<std::string> kDets = {"the", "its", "a", "that", "this", "some"};
const std::vector<std::string> kPreps = {"of", "in", "at", "near", "under", "over",
                                         "with", "as", "to", "by", "from", "for"};
const std::vector<std::string> kAdjs = {"old", "new", "great", "small", "main",
                                        "true", "fine", "dark", "broad", "quiet"};
const std::vector<std::string> kKeywords = {
    "capital", "color",   "leader", "origin",  "language", "currency", "climate", "founder",
    "river",   "metal",   "style",  "genre",   "emblem",   "season",   "flavor",  "anthem",
    "border",  "dialect", "harbor", "mineral", "patron",   "region",   "symbol",  "terrain"};

const std::vector<std::string> kNameOnsets = {"v",  "m",  "t",  "r", "s",  "d",  "n", "g",
                                              "p",  "z",  "k",  "l", "b",  "h",  "f", "br",
                                              "tr", "kl", "dr", "sm", "gr", "pl"};
const std::vector<std::string> kNameNuclei = {"a", "e", "i", "o", "u", "ae", "ia", "ou", "ei"};
const std::vector<std::string> kNameCodas = {"l", "n", "r", "s", "t", "x", "m", "k", "d", ""};
const std::vector<std::string> kObjectSuffixes = {"ia", "os", "um", "ar", "eth",
                                                  "on", "is", "ur", "al", "en"};

std::string make_name(Rng& rng, bool object_flavor) {
    std::string name;
    const int syllables = 2;
    for (int s = 0; s < syllables; ++s) {
        name += kNameOnsets[size_t(rng.index(kNameOnsets.size()))];
        name += kNameNuclei[size_t(rng.index(kNameNuclei.size()))];
        if (s + 1 < syllables) {
            name += kNameCodas[size_t(rng.index(kNameCodas.size()))];
        }
    }
    if (object_flavor) {
        name += kObjectSuffixes[size_t(rng.index(kObjectSuffixes.size()))];
    } else {
        name += kNameCodas[size_t(rng.index(kNameCodas.size()))];
    }
    return name;
}

SurfaceForm make_form(Rng& rng, const std::string& kw) {
    auto pick = [&](const std::vector<std::string>& bank) {
        return bank[size_t(rng.index(bank.size()))];
    };
    SurfaceForm f;
    switch (rng.index(7)) {
        case 0: f.tokens = {pick(kCopulas), pick(kDets), kw, pick(kPreps)}; break;
        case 1: f.tokens = {pick(kVerbs), pick(kDets), kw, pick(kPreps)}; break;
        case 2: f.tokens = {pick(kDets), kw, pick(kCopulas)}; break;
        case 3: f.tokens = {pick(kVerbs), kw, pick(kPreps)}; break;
        case 4: f.tokens = {pick(kCopulas), pick(kAdjs), kw, pick(kPreps)}; break;
        case 5: f.tokens = {pick(kDets), pick(kAdjs), kw, pick(kCopulas)}; break;
        default: f.tokens = {pick(kVerbs), pick(kDets), pick(kAdjs), kw, pick(kPreps)}; break;
    }
    return f;
}

bool is_token_run(const std::vector<std::string>& haystack, const std::vector<std::string>& needle) {
    if (needle.empty() || needle.size() > haystack.size()) {
        return false;
    }
    for (size_t start = 0; start + needle.size() <= haystack.size(); ++start) {
        bool match = true;
        for (size_t i = 0; i < needle.size(); ++i) {
            if (haystack[start + i] != needle[i]) {
                match = false;
                break;
            }
        }
        if (match) {
            return true;
        }
    }
    return false;
}

// eval forms must be distinct from train forms and never occur inside one
bool forms_admissible(const std::vector<SurfaceForm>& train, const std::vector<SurfaceForm>& eval) {
    for (const auto& e : eval) {
        for (const auto& t : train) {
            if (is_token_run(t.tokens, e.tokens)) {
                return false;
            }
        }
    }
    return true;
}

} // namespace

void WorldSpec::validate() const {
    require(num_relations >= 1, ErrorKind::config, "world: need at least one relation");
    require(entities_per_relation >= 2, ErrorKind::config,
            "world: entities_per_relation must be >= 2");
    require(objects_per_relation >= 2, ErrorKind::config,
            "world: objects_per_relation must be >= 2");
    require(surface_forms_per_relation >= 4, ErrorKind::config,
            "world: surface_forms_per_relation must be >= 4");
    require(eval_forms_per_relation >= 1 &&
                eval_forms_per_relation <= surface_forms_per_relation - 2,
            ErrorKind::config, "world: eval forms must leave at least two rendering forms");
    require(corpus_repetitions >= 1, ErrorKind::config, "world: corpus_repetitions must be >= 1");
    require(filler_ratio >= 0.0, ErrorKind::config, "world: filler_ratio must be >= 0");
    require(train_fraction > 0.0 && train_fraction < 1.0, ErrorKind::config,
            "world: train_fraction must be in (0, 1)");
}

const Relation& World::relation_by_id(const std::string& id) const {
    for (const auto& r : relations) {
        if (r.id == id) {
            return r;
        }
    }
    fail(ErrorKind::data, "unknown relation: " + id);
}

World generate_world(const WorldSpec& spec) {
    spec.validate();
    World world;
    world.spec = spec;

    Rng rng(derive_seed(spec.seed, "world"));

    std::set<std::string> used_names(kVerbs.begin(), kVerbs.end());
    used_names.insert(kCopulas.begin(), kCopulas.end());
    used_names.insert(kDets.begin(), kDets.end());
    used_names.insert(kPreps.begin(), kPreps.end());
    used_names.insert(kAdjs.begin(), kAdjs.end());
    used_names.insert(kKeywords.begin(), kKeywords.end());

    auto fresh_name = [&](bool object_flavor) {
        for (int tries = 0; tries < 10000; ++tries) {
            std::string name = make_name(rng, object_flavor);
            if (used_names.insert(name).second) {
                return name;
            }
        }
        fail(ErrorKind::config, "world: name space exhausted");
    };

    for (int ri = 0; ri < spec.num_relations; ++ri) {
        Relation rel;
        char id[16];
        std::snprintf(id, sizeof(id), "P%02d", ri);
        rel.id = id;
        rel.keyword = ri < int(kKeywords.size()) ? kKeywords[size_t(ri)]
                                                 : "trait" + std::to_string(ri);

        // surface forms: distinct, eval forms never a token run of a train form
        for (int attempt = 0; attempt < 200; ++attempt) {
            std::vector<SurfaceForm> forms;
            std::set<std::vector<std::string>> seen;
            int guard = 0;
            while (int(forms.size()) < spec.surface_forms_per_relation && guard++ < 5000) {
                SurfaceForm f = make_form(rng, rel.keyword);
                if (seen.insert(f.tokens).second) {
                    forms.push_back(std::move(f));
                }
            }
            require(int(forms.size()) == spec.surface_forms_per_relation, ErrorKind::config,
                    "world: could not generate enough distinct surface forms");
            std::vector<SurfaceForm> eval(forms.end() - spec.eval_forms_per_relation, forms.end());
            forms.resize(forms.size() - size_t(spec.eval_forms_per_relation));
            if (forms_admissible(forms, eval)) {
                rel.train_forms = std::move(forms);
                rel.eval_forms = std::move(eval);
                break;
            }
        }
        require(!rel.train_forms.empty(), ErrorKind::config,
                "world: failed to build admissible surface forms");

        for (int i = 0; i < spec.entities_per_relation; ++i) {
            rel.subjects.push_back(fresh_name(false));
        }
        for (int i = 0; i < spec.objects_per_relation; ++i) {
            rel.objects.push_back(fresh_name(true));
        }

        for (const auto& s : rel.subjects) {
            Fact fact;
            fact.relation_index = ri;
            fact.subject = s;
            fact.object = rel.objects[size_t(rng.index(rel.objects.size()))];
            world.facts.push_back(std::move(fact));
        }

        world.relations.push_back(std::move(rel));
    }

    return world;
}

Corpus render_corpus(const World& world) {
    const WorldSpec& spec = world.spec;
    Rng rng(derive_seed(spec.seed, "corpus"));

    Corpus corpus;

    // triplet split: seeded shuffle of subjects per relation
    std::vector<std::vector<int>> fact_index_by_relation(size_t(spec.num_relations));
    for (size_t fi = 0; fi < world.facts.size(); ++fi) {
        fact_index_by_relation[size_t(world.facts[fi].relation_index)].push_back(int(fi));
    }

    for (int ri = 0; ri < spec.num_relations; ++ri) {
        auto order = fact_index_by_relation[size_t(ri)];
        rng.shuffle(order);
        const int n_train = std::max(1, int(spec.train_fraction * double(order.size())));
        for (size_t k = 0; k < order.size(); ++k) {
            const Fact& f = world.facts[size_t(order[k])];
            Triplet t{world.relations[size_t(ri)].id, f.subject, f.object};
            if (int(k) < n_train) {
                corpus.train_triplets.push_back(std::move(t));
            } else {
                corpus.test_triplets.push_back(std::move(t));
            }
        }
    }

    // fact sentences: every fact rendered corpus_repetitions times, cycling
    // through the train-rendering forms with a per-fact offset
    for (const Fact& f : world.facts) {
        const Relation& rel = world.relations[size_t(f.relation_index)];
        const int offset = rng.index(rel.train_forms.size());
        for (int r = 0; r < spec.corpus_repetitions; ++r) {
            const SurfaceForm& form =
                rel.train_forms[size_t((offset + r) % int(rel.train_forms.size()))];
            std::vector<std::string> line;
            line.push_back(f.subject);
            line.insert(line.end(), form.tokens.begin(), form.tokens.end());
            line.push_back(f.object);
            corpus.lines.push_back(std::move(line));
        }
    }

    // coverage fillers: every glue word occurs in the corpus, so held-out
    // paraphrase forms never contain an untrained embedding
    {
        std::vector<std::string> bank;
        for (const auto* b : {&kVerbs, &kCopulas, &kDets, &kPreps, &kAdjs}) {
            bank.insert(bank.end(), b->begin(), b->end());
        }
        for (int rep = 0; rep < 2; ++rep) {
            rng.shuffle(bank);
            for (size_t start = 0; start < bank.size(); start += 6) {
                std::vector<std::string> line(bank.begin() + long(start),
                                              bank.begin() + long(std::min(start + 6, bank.size())));
                corpus.lines.push_back(std::move(line));
            }
        }
    }

    // filler noise: glue-word sentences, no keywords, so held-out forms can
    // never appear in them
    const int n_fillers = int(spec.filler_ratio * double(corpus.lines.size()));
    auto pick = [&](const std::vector<std::string>& bank) {
        return bank[size_t(rng.index(bank.size()))];
    };
    for (int i = 0; i < n_fillers; ++i) {
        std::vector<std::string> line;
        const int len = 4 + rng.index(6);
        for (int k = 0; k < len; ++k) {
            switch (rng.index(5)) {
                case 0: line.push_back(pick(kVerbs)); break;
                case 1: line.push_back(pick(kCopulas)); break;
                case 2: line.push_back(pick(kDets)); break;
                case 3: line.push_back(pick(kPreps)); break;
                default: line.push_back(pick(kAdjs)); break;
            }
        }
        corpus.lines.push_back(std::move(line));
    }

    rng.shuffle(corpus.lines);
    return corpus;
}

std::vector<std::string> Corpus::all_tokens() const {
    std::set<std::string> tokens;
    for (const auto& line : lines) {
        tokens.insert(line.begin(), line.end());
    }
    return std::vector<std::string>(tokens.begin(), tokens.end());
}

std::vector<Template> human_templates(const World& world) {
    std::vector<Template> out;
    for (const auto& rel : world.relations) {
        for (size_t k = 0; k < rel.eval_forms.size(); ++k) {
            Template t;
            t.id = rel.id + ":human:" + std::to_string(k);
            t.relation_id = rel.id;
            t.type = PromptType::human;
            t.payload_tokens = rel.eval_forms[k].tokens;
            t.method = "held_out_paraphrase";
            t.seed = 0;
            t.steps = 0;
            out.push_back(std::move(t));
        }
    }
    return out;
}

bool contains_token_run(const std::vector<std::vector<std::string>>& lines,
                        const std::vector<std::string>& needle) {
    for (const auto& line : lines) {
        if (is_token_run(line, needle)) {
            return true;
        }
    }
    return false;
}

} // namespace plab
