#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "plab/tasks.hpp"

namespace plab {

// Synthetic fact world standing in for a LAMA-style dataset at desk scale.
// Each relation has a keyword, subject and object name pools, and a set of
// word-level surface forms split into corpus-rendering forms and held-out
// evaluation paraphrases (the "human" templates).

struct WorldSpec {
    int num_relations = 8;
    int entities_per_relation = 30;
    int objects_per_relation = 12;
    int surface_forms_per_relation = 6; // >= 4
    int eval_forms_per_relation = 2;    // held out of the corpus
    int corpus_repetitions = 6;         // renderings per fact
    double filler_ratio = 0.3;          // noise sentences per fact sentence
    double train_fraction = 0.6;        // triplet split for prompt induction
    uint64_t seed = 0;

    void validate() const;
};

struct SurfaceForm {
    std::vector<std::string> tokens; // placed between subject and object
};

struct Relation {
    std::string id; // "P00", "P01", ...
    std::string keyword;
    std::vector<SurfaceForm> train_forms;
    std::vector<SurfaceForm> eval_forms;
    std::vector<std::string> subjects;
    std::vector<std::string> objects;
};

struct Fact {
    int relation_index = 0;
    std::string subject;
    std::string object;
};

struct World {
    WorldSpec spec;
    std::vector<Relation> relations;
    std::vector<Fact> facts;

    const Relation& relation_by_id(const std::string& id) const;
};

struct Corpus {
    std::vector<std::vector<std::string>> lines; // token sequences, shuffled
    std::vector<Triplet> train_triplets;
    std::vector<Triplet> test_triplets;

    // every distinct token of the world, including held-out eval form tokens
    std::vector<std::string> all_tokens() const;
};

World generate_world(const WorldSpec& spec);
Corpus render_corpus(const World& world);

// held-out paraphrase forms as human templates, ids "<rel>:human:<k>"
std::vector<Template> human_templates(const World& world);

// true when needle occurs as a contiguous token run in any line
bool contains_token_run(const std::vector<std::vector<std::string>>& lines,
                        const std::vector<std::string>& needle);

} // namespace plab
