#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "mendkit/context.hpp"
#include "mendkit/corpus.hpp"

using namespace mendkit;

namespace {

const std::filesystem::path kFixtures = MENDKIT_FIXTURE_DIR;

std::set<std::pair<std::size_t, std::size_t>> extents(const std::vector<LineRange>& fns) {
    std::set<std::pair<std::size_t, std::size_t>> out;
    for (const auto& r : fns) out.insert({r.start, r.last()});
    return out;
}

const char* kC = R"(#include <stdio.h>
#define MAX(a, b) ((a) > (b) ? (a) : (b))

static int counter = 0;

int add(int a, int b)
{
    int s = a + b;
    return s;
}

struct point { int x; int y; };

/* a comment with { braces } */
static const char *name(void) {
    const char *s = "}{";
    if (counter > 0) {
        return s;
    }
    return "x";
}
)";

const char* kJava = R"(package demo;

import java.util.List;

public class Box<T> {
    private final List<T> items;

    @Override
    public String toString() {
        return "Box" + items;
    }

    public int size() throws IllegalStateException {
        Runnable r = new Runnable() {
            public void run() {
                System.out.println("{");
            }
        };
        for (T t : items) {
            r.run();
        }
        return items.size();
    }

    static class Inner {
        int v;
    }
}
)";

const char* kJs = R"(import fs from 'fs';

function outer(a) {
  const inner = function (b) {
    return b + 1;
  };
  function named(c) {
    return `${c}}`;
  }
  return inner(a) + named(a);
}

const arrow = (x, y = {}) => {
  if (x) { return y; }
  return /}/.test(x);
};

class Thing {
  method() {
    return 1;
  }
}
)";

}  // namespace

TEST(BraceScanner, CFunctions) {
    BraceScanner scanner(Language::c);
    EXPECT_EQ(extents(scanner.functions(kC)),
              (std::set<std::pair<std::size_t, std::size_t>>{{6, 10}, {15, 21}}));
}

TEST(BraceScanner, JavaMethodsIncludeAnnotations) {
    BraceScanner scanner(Language::java);
    EXPECT_EQ(extents(scanner.functions(kJava)),
              (std::set<std::pair<std::size_t, std::size_t>>{{8, 11}, {13, 23}, {15, 17}}));
}

TEST(BraceScanner, JavaScriptNestedAndArrow) {
    BraceScanner scanner(Language::javascript);
    EXPECT_EQ(extents(scanner.functions(kJs)),
              (std::set<std::pair<std::size_t, std::size_t>>{{3, 11}, {4, 6}, {7, 9}, {13, 16}, {19, 21}}));
}

TEST(BraceScanner, MalformedSourceThrows) {
    BraceScanner scanner(Language::c);
    EXPECT_THROW(scanner.functions("int f() {\n"), ScanError);
    EXPECT_THROW(scanner.functions("int f() }\n"), ScanError);
    EXPECT_THROW(scanner.functions("char *s = \"abc\n"), ScanError);
    EXPECT_THROW(scanner.functions("/* open"), ScanError);
}

TEST(IndentScanner, MatchesAstOracle) {
    std::ifstream in(kFixtures / "python" / "extents.json");
    ASSERT_TRUE(in);
    const auto expected = nlohmann::json::parse(in);
    IndentScanner scanner;
    for (const auto& [file, ranges] : expected.items()) {
        std::set<std::pair<std::size_t, std::size_t>> want;
        for (const auto& r : ranges) want.insert({r[0].get<std::size_t>(), r[1].get<std::size_t>()});
        const std::string src = read_file(kFixtures / "python" / file);
        EXPECT_EQ(extents(scanner.functions(src)), want) << file;
    }
}

TEST(EnclosingFunction, LoneCFunction) {
    auto span = enclosing_function(kC, {8, 1}, Language::c);
    ASSERT_TRUE(span);
    EXPECT_EQ(span->kind, ContextKind::enclosing_function);
    EXPECT_EQ(span->range, (LineRange{6, 5}));
    EXPECT_EQ(span->text, "int add(int a, int b)\n{\n    int s = a + b;\n    return s;\n}");
}

TEST(EnclosingFunction, OutermostJavaScriptFunction) {
    auto span = enclosing_function(kJs, {5, 1}, Language::javascript);
    ASSERT_TRUE(span);
    EXPECT_EQ(span->range, (LineRange{3, 9}));
}

TEST(EnclosingFunction, OutermostPythonFunction) {
    const std::string src = read_file(kFixtures / "python" / "nested.py");
    auto span = enclosing_function(src, {4, 1}, Language::python);
    ASSERT_TRUE(span);
    EXPECT_EQ(span->range, (LineRange{1, 6}));
}

TEST(EnclosingFunction, TopLevelHunkHasNone) {
    EXPECT_FALSE(enclosing_function(kJava, {3, 1}, Language::java));
    EXPECT_FALSE(enclosing_function(kJs, {1, 1}, Language::javascript));
    EXPECT_FALSE(enclosing_function("import os\n\ndef f():\n    pass\n", {1, 1}, Language::python));
}

TEST(EnclosingFunction, ClassBodyIsOutsideAFunction) {
    EXPECT_FALSE(enclosing_function(kJava, {26, 1}, Language::java));
    const std::string src = read_file(kFixtures / "python" / "basic.py");
    EXPECT_FALSE(enclosing_function(src, {23, 1}, Language::python));
}

TEST(EnclosingFunction, WholeFileFunctionIsItsOwnContext) {
    const std::string src = "int f(void) {\n  return 1;\n}\n";
    auto span = enclosing_function(src, {1, 3}, Language::c);
    ASSERT_TRUE(span);
    EXPECT_EQ(span->range, (LineRange{1, 3}));
}

TEST(EnclosingFunction, HunkSpanningTwoFunctionsHasNone) {
    EXPECT_FALSE(enclosing_function(kC, {9, 8}, Language::c));
}

TEST(EnclosingFunction, OutOfBoundsHunkThrows) {
    EXPECT_THROW(enclosing_function("int x;\n", {3, 1}, Language::c), InvalidArgument);
}

TEST(WindowContext, Examples) {
    std::string twenty;
    for (int i = 1; i <= 20; ++i) twenty += "l" + std::to_string(i) + "\n";
    EXPECT_EQ(window_context("a\nb\n", {1, 1}).range, (LineRange{1, 2}));
    EXPECT_EQ(window_context(twenty, {5, 1}).range, (LineRange{2, 7}));
    EXPECT_EQ(window_context(twenty, {10, 0}).range, (LineRange{7, 6}));
    EXPECT_EQ(window_context(twenty, {19, 2}).range, (LineRange{16, 5}));
    EXPECT_EQ(window_context(twenty, {5, 1}).text, "l2\nl3\nl4\nl5\nl6\nl7\nl8");
    EXPECT_EQ(window_context(twenty, {5, 1}).kind, ContextKind::window);
}

TEST(ContextForHunk, FunctionOrWindow) {
    EXPECT_EQ(context_for_hunk(kC, {8, 1}, Language::c).kind, ContextKind::enclosing_function);
    const auto top = context_for_hunk(kC, {4, 1}, Language::c);
    EXPECT_EQ(top.kind, ContextKind::window);
    EXPECT_EQ(top.range, (LineRange{1, 7}));
}

TEST(ContextForHunk, ScanFailureFallsBackToWindow) {
    std::vector<std::string> warnings;
    const auto span = context_for_hunk("int f() {\n  x = 1;\n", {2, 1}, Language::c, &warnings);
    EXPECT_EQ(span.kind, ContextKind::window);
    EXPECT_EQ(warnings.size(), 1u);
}

TEST(ContextForHunk, AlwaysCoversTheHunk) {
    const std::string py = read_file(kFixtures / "python" / "basic.py");
    const std::size_t n = split_lines(py).size();
    for (std::size_t start = 1; start <= n + 1; ++start) {
        for (std::size_t len = 0; start + len <= n + 1 && len < 4; ++len) {
            const LineRange h{start, len};
            const auto span = context_for_hunk(py, h, Language::python);
            if (len > 0) {
                EXPECT_TRUE(span.range.contains(h)) << start << "+" << len;
            } else {
                EXPECT_TRUE(span.range.start <= start && start <= span.range.start + span.range.length)
                    << start << "+0";
            }
        }
    }
}

TEST(ContextForHunk, InsertionPointInsideFunction) {
    const std::string src = "def f():\n    a = 1\n    b = 2\n";
    EXPECT_EQ(context_for_hunk(src, {3, 0}, Language::python).kind, ContextKind::enclosing_function);
    // Insertion before the def line sits outside the function.
    EXPECT_EQ(context_for_hunk(src, {1, 0}, Language::python).kind, ContextKind::window);
}
