// Copyright (c) 2026 The expdiff Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "toml_lite.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <limits>

namespace expdiff::toml {

namespace {

class Parser {
public:
    explicit Parser(std::string_view text) : text_(text) {}

    nlohmann::json run() {
        nlohmann::json root = nlohmann::json::object();
        nlohmann::json* table = &root;
        for (;;) {
            skip_blank_and_comments(true);
            if (eof()) break;
            if (peek() == '[') {
                ++pos_;
                skip_spaces();
                const std::string name = parse_key();
                skip_spaces();
                expect(']');
                if (root.contains(name)) fail("duplicate table [" + name + "]");
                root[name] = nlohmann::json::object();
                table = &root[name];
            } else {
                const std::string key = parse_key();
                skip_spaces();
                expect('=');
                skip_spaces();
                if (table->contains(key)) fail("duplicate key '" + key + "'");
                (*table)[key] = parse_value();
            }
            end_of_line();
        }
        return root;
    }

private:
    [[noreturn]] void fail(const std::string& msg) const {
        throw ParseError("toml line " + std::to_string(line_) + ": " + msg);
    }

    bool eof() const { return pos_ >= text_.size(); }
    char peek() const { return eof() ? '\0' : text_[pos_]; }

    void expect(char c) {
        if (peek() != c) fail(std::string("expected '") + c + "'");
        ++pos_;
    }

    void skip_spaces() {
        while (!eof() && (peek() == ' ' || peek() == '\t')) ++pos_;
    }

    void skip_blank_and_comments(bool newlines) {
        for (;;) {
            skip_spaces();
            if (peek() == '#') {
                while (!eof() && peek() != '\n') ++pos_;
            }
            if (newlines && (peek() == '\n' || peek() == '\r')) {
                if (peek() == '\n') ++line_;
                ++pos_;
                continue;
            }
            return;
        }
    }

    void end_of_line() {
        skip_blank_and_comments(false);
        if (eof()) return;
        if (peek() == '\r') ++pos_;
        if (peek() != '\n') fail("unexpected trailing characters");
        ++pos_;
        ++line_;
    }

    std::string parse_key() {
        if (peek() == '"' || peek() == '\'') return parse_string();
        const std::size_t start = pos_;
        while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_' || peek() == '-')) ++pos_;
        if (start == pos_) fail("expected a key");
        if (peek() == '.') fail("dotted keys are not supported");
        return std::string(text_.substr(start, pos_ - start));
    }

    std::string parse_string() {
        const char quote = peek();
        ++pos_;
        std::string out;
        while (!eof() && peek() != quote) {
            char c = peek();
            if (c == '\n') fail("unterminated string");
            ++pos_;
            if (quote == '"' && c == '\\') {
                const char e = peek();
                ++pos_;
                switch (e) {
                    case 'n': c = '\n'; break;
                    case 't': c = '\t'; break;
                    case 'r': c = '\r'; break;
                    case '"': c = '"'; break;
                    case '\\': c = '\\'; break;
                    default: fail(std::string("unsupported escape \\") + e);
                }
            }
            out.push_back(c);
        }
        if (eof()) fail("unterminated string");
        ++pos_;
        return out;
    }

    nlohmann::json parse_array() {
        ++pos_;
        nlohmann::json arr = nlohmann::json::array();
        for (;;) {
            skip_blank_and_comments(true);
            if (peek() == ']') {
                ++pos_;
                return arr;
            }
            arr.push_back(parse_value());
            skip_blank_and_comments(true);
            if (peek() == ',') {
                ++pos_;
                continue;
            }
            if (peek() == ']') {
                ++pos_;
                return arr;
            }
            fail("expected ',' or ']' in array");
        }
    }

    nlohmann::json parse_scalar() {
        const std::size_t start = pos_;
        while (!eof() && peek() != ',' && peek() != ']' && peek() != '#' && peek() != '\n' && peek() != '\r' &&
               peek() != ' ' && peek() != '\t') {
            ++pos_;
        }
        std::string token(text_.substr(start, pos_ - start));
        if (token.empty()) fail("expected a value");
        if (token == "true") return true;
        if (token == "false") return false;
        if (token == "inf" || token == "+inf") return std::numeric_limits<double>::infinity();
        if (token == "-inf") return -std::numeric_limits<double>::infinity();
        if (token == "nan" || token == "+nan" || token == "-nan") fail("nan is not allowed in configs");

        std::string digits;
        for (char c : token) {
            if (c != '_') digits.push_back(c);
        }
        if (!digits.empty() && digits.front() == '+') digits.erase(0, 1);
        const bool is_float = digits.find_first_of(".eE") != std::string::npos;
        const char* first = digits.data();
        const char* last = digits.data() + digits.size();
        if (is_float) {
            double v = 0.0;
            const auto [ptr, ec] = std::from_chars(first, last, v);
            if (ec != std::errc{} || ptr != last) fail("invalid number '" + token + "'");
            return v;
        }
        std::int64_t v = 0;
        const auto [ptr, ec] = std::from_chars(first, last, v);
        if (ec != std::errc{} || ptr != last) fail("invalid value '" + token + "'");
        return v;
    }

    nlohmann::json parse_value() {
        const char c = peek();
        if (c == '"' || c == '\'') return parse_string();
        if (c == '[') return parse_array();
        if (c == '{') fail("inline tables are not supported");
        return parse_scalar();
    }

    std::string_view text_;
    std::size_t pos_ = 0;
    int line_ = 1;
};

}  // namespace

nlohmann::json parse(std::string_view text) { return Parser(text).run(); }

}  // namespace expdiff::toml
